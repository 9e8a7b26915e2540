#pragma once

#include <Eigen/Core>

#include <numeric>
#include <string>
#include <vector>

#include "stad/errors.hpp"

namespace stad {

// N-dimensional real array, row-major. Feature maps use layout (C, H, W),
// so channel planes are contiguous.
template <typename Scalar>
struct Tensor {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using PlaneMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstPlaneMap =
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    std::vector<int> shape;
    Array data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_, Scalar fill = Scalar(0)) : shape(std::move(shape_)) {
        for (int d : shape)
            if (d < 1) throw ValidationError("tensor dimensions must be positive");
        data = Array::Constant(element_count(), fill);
    }

    Eigen::Index element_count() const {
        Eigen::Index n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    int rank() const { return static_cast<int>(shape.size()); }
    int channels() const { return shape[0]; }
    int height() const { return shape[rank() - 2]; }
    int width() const { return shape[rank() - 1]; }

    // (C, H, W) accessors.
    Scalar& at(int c, int y, int x) {
        return data[(static_cast<Eigen::Index>(c) * height() + y) * width() + x];
    }
    Scalar at(int c, int y, int x) const {
        return data[(static_cast<Eigen::Index>(c) * height() + y) * width() + x];
    }

    PlaneMap plane(int c) {
        return PlaneMap(data.data() + static_cast<Eigen::Index>(c) * height() * width(),
                        height(), width());
    }
    ConstPlaneMap plane(int c) const {
        return ConstPlaneMap(data.data() + static_cast<Eigen::Index>(c) * height() * width(),
                             height(), width());
    }

    // All channel planes as a (C, H*W) matrix view.
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_planes() {
        return {data.data(), channels(), static_cast<Eigen::Index>(height()) * width()};
    }
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    as_planes() const {
        return {data.data(), channels(), static_cast<Eigen::Index>(height()) * width()};
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && (a.data == b.data).all();
    }
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

template <typename Scalar>
void require_feature_map(const Tensor<Scalar>& t, const std::string& what) {
    if (t.rank() != 3)
        throw ValidationError(what + ": expected a (C,H,W) tensor, rank " +
                              std::to_string(t.rank()));
    if (t.data.size() != t.element_count())
        throw ValidationError(what + ": data length does not match shape");
}

// Bilinear sample of channel c at pixel coordinates (x, y), clamped to the
// tensor's spatial domain.
template <typename Scalar>
Scalar bilinear_sample(const Tensor<Scalar>& t, int c, Scalar x, Scalar y) {
    const int W = t.width();
    const int H = t.height();
    x = std::min(std::max(x, Scalar(0)), Scalar(W - 1));
    y = std::min(std::max(y, Scalar(0)), Scalar(H - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, W - 1);
    const int y1 = std::min(y0 + 1, H - 1);
    const Scalar fx = x - Scalar(x0);
    const Scalar fy = y - Scalar(y0);
    const Scalar top = t.at(c, y0, x0) * (Scalar(1) - fx) + t.at(c, y0, x1) * fx;
    const Scalar bot = t.at(c, y1, x0) * (Scalar(1) - fx) + t.at(c, y1, x1) * fx;
    return top * (Scalar(1) - fy) + bot * fy;
}

}  // namespace stad
