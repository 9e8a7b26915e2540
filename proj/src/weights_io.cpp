#include "stad/weights_io.hpp"

#include <random>

#include <nlohmann/json.hpp>

#include "stad/errors.hpp"

namespace stad {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ValidationError("weights " + path + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (!j.is_object() || it == j.end()) fail(path, std::string("missing '") + key + "'");
    return *it;
}

MatrixX<double> parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) fail(path, "expected a 2-d array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    MatrixX<double> m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!j[static_cast<std::size_t>(r)].is_array() ||
            static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols)
            fail(path, "ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& v = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (!v.is_number()) fail(path, "non-numeric entry");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

VectorX<double> parse_vector_opt(const json& parent, const char* key, const std::string& path) {
    auto it = parent.find(key);
    if (it == parent.end() || it->is_null()) return VectorX<double>();
    if (!it->is_array()) fail(path + "." + key, "expected an array");
    VectorX<double> v(static_cast<Eigen::Index>(it->size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const json& e = (*it)[static_cast<std::size_t>(i)];
        if (!e.is_number()) fail(path + "." + key, "non-numeric entry");
        v[i] = e.get<double>();
    }
    return v;
}

Tensor<double> parse_spatial_kernel(const json& j, const std::string& path) {
    // 2 x k x k nested arrays -> (1, 2, k, k) tensor.
    if (!j.is_array() || j.size() != 2) fail(path, "expected [2][k][k]");
    const json& first = j[0];
    if (!first.is_array() || first.empty()) fail(path, "expected [2][k][k]");
    const int k = static_cast<int>(first.size());
    Tensor<double> kernel({1, 2, k, k});
    for (int c = 0; c < 2; ++c) {
        const json& plane = j[static_cast<std::size_t>(c)];
        if (!plane.is_array() || static_cast<int>(plane.size()) != k) fail(path, "ragged kernel");
        for (int y = 0; y < k; ++y) {
            const json& row = plane[static_cast<std::size_t>(y)];
            if (!row.is_array() || static_cast<int>(row.size()) != k) fail(path, "ragged kernel");
            for (int x = 0; x < k; ++x) {
                const json& v = row[static_cast<std::size_t>(x)];
                if (!v.is_number()) fail(path, "non-numeric entry");
                kernel.data[(static_cast<Eigen::Index>(c) * k + y) * k + x] = v.get<double>();
            }
        }
    }
    return kernel;
}

json matrix_to_json(const MatrixX<double>& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const VectorX<double>& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json spatial_kernel_to_json(const Tensor<double>& kernel) {
    const int k = kernel.shape[2];
    json planes = json::array();
    for (int c = 0; c < 2; ++c) {
        json plane = json::array();
        for (int y = 0; y < k; ++y) {
            json row = json::array();
            for (int x = 0; x < k; ++x)
                row.push_back(kernel.data[(static_cast<Eigen::Index>(c) * k + y) * k + x]);
            plane.push_back(std::move(row));
        }
        planes.push_back(std::move(plane));
    }
    return planes;
}

double uniform_signed(std::mt19937_64& rng) {
    // [-0.5, 0.5) from the top 53 bits; independent of library distributions.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
}

MatrixX<double> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    MatrixX<double> m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform_signed(rng);
    return m;
}

}  // namespace

FusionNetWeights parse_weights(const std::string& document) {
    json j = json::parse(document, nullptr, false);
    if (j.is_discarded()) throw ValidationError("weights: malformed JSON");

    FusionNetWeights w;
    const json& fusion = need(j, "fusion", "$");
    w.fusion.reduce_weight = parse_matrix(need(fusion, "reduce_weight", "$.fusion"), "$.fusion.reduce_weight");
    w.fusion.reduce_bias = parse_vector_opt(fusion, "reduce_bias", "$.fusion");

    const json& cbam = need(j, "cbam", "$");
    w.fusion.cbam.mlp_w1 = parse_matrix(need(cbam, "mlp_w1", "$.cbam"), "$.cbam.mlp_w1");
    w.fusion.cbam.mlp_b1 = parse_vector_opt(cbam, "mlp_b1", "$.cbam");
    w.fusion.cbam.mlp_w2 = parse_matrix(need(cbam, "mlp_w2", "$.cbam"), "$.cbam.mlp_w2");
    w.fusion.cbam.mlp_b2 = parse_vector_opt(cbam, "mlp_b2", "$.cbam");
    w.fusion.cbam.spatial_kernel =
        parse_spatial_kernel(need(cbam, "spatial_kernel", "$.cbam"), "$.cbam.spatial_kernel");
    if (cbam.contains("spatial_bias")) {
        if (!cbam["spatial_bias"].is_number()) fail("$.cbam.spatial_bias", "expected a number");
        w.fusion.cbam.spatial_bias = cbam["spatial_bias"].get<double>();
    }

    const json& dy = need(j, "dysample", "$");
    const json& scale = need(dy, "scale", "$.dysample");
    if (!scale.is_number_integer()) fail("$.dysample.scale", "expected an integer");
    w.dysample.scale = scale.get<int>();
    const json& range = need(dy, "offset_range", "$.dysample");
    if (!range.is_number()) fail("$.dysample.offset_range", "expected a number");
    w.dysample.offset_range = range.get<double>();
    w.dysample.offset_weight =
        parse_matrix(need(dy, "offset_weight", "$.dysample"), "$.dysample.offset_weight");
    w.dysample.offset_bias = parse_vector_opt(dy, "offset_bias", "$.dysample");
    return w;
}

std::string serialize_weights(const FusionNetWeights& w) {
    json j;
    j["fusion"] = json{{"reduce_weight", matrix_to_json(w.fusion.reduce_weight)},
                       {"reduce_bias", vector_to_json(w.fusion.reduce_bias)}};
    j["cbam"] = json{{"mlp_w1", matrix_to_json(w.fusion.cbam.mlp_w1)},
                     {"mlp_b1", vector_to_json(w.fusion.cbam.mlp_b1)},
                     {"mlp_w2", matrix_to_json(w.fusion.cbam.mlp_w2)},
                     {"mlp_b2", vector_to_json(w.fusion.cbam.mlp_b2)},
                     {"spatial_kernel", spatial_kernel_to_json(w.fusion.cbam.spatial_kernel)},
                     {"spatial_bias", w.fusion.cbam.spatial_bias}};
    j["dysample"] = json{{"scale", w.dysample.scale},
                         {"offset_range", w.dysample.offset_range},
                         {"offset_weight", matrix_to_json(w.dysample.offset_weight)},
                         {"offset_bias", vector_to_json(w.dysample.offset_bias)}};
    return j.dump(2) + "\n";
}

FusionNetWeights random_weights(int channels, int reduction, int spatial_kernel, int scale,
                                std::uint64_t seed) {
    if (channels < 1 || reduction < 1 || channels % reduction != 0)
        throw ValidationError("random_weights: channels must be a positive multiple of reduction");
    if (spatial_kernel < 1 || spatial_kernel % 2 == 0)
        throw ValidationError("random_weights: spatial kernel must be odd");
    if (scale < 2) throw ValidationError("random_weights: scale must be >= 2");

    std::mt19937_64 rng(seed);
    const int hidden = channels / reduction;

    FusionNetWeights w;
    w.fusion.reduce_weight = random_matrix(channels, 2 * channels, rng);
    w.fusion.reduce_bias = random_matrix(channels, 1, rng).col(0);
    w.fusion.cbam.mlp_w1 = random_matrix(hidden, channels, rng);
    w.fusion.cbam.mlp_b1 = random_matrix(hidden, 1, rng).col(0);
    w.fusion.cbam.mlp_w2 = random_matrix(channels, hidden, rng);
    w.fusion.cbam.mlp_b2 = random_matrix(channels, 1, rng).col(0);
    w.fusion.cbam.spatial_kernel = Tensor<double>({1, 2, spatial_kernel, spatial_kernel});
    for (Eigen::Index i = 0; i < w.fusion.cbam.spatial_kernel.data.size(); ++i)
        w.fusion.cbam.spatial_kernel.data[i] = uniform_signed(rng);
    w.fusion.cbam.spatial_bias = uniform_signed(rng);

    w.dysample.scale = scale;
    w.dysample.offset_range = 0.5;
    w.dysample.offset_weight = random_matrix(2 * scale * scale, channels, rng);
    w.dysample.offset_bias = random_matrix(2 * scale * scale, 1, rng).col(0);
    return w;
}

}  // namespace stad
