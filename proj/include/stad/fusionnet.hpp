#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "stad/errors.hpp"
#include "stad/tensor.hpp"
#include "stad/types.hpp"

namespace stad {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Plain cross-correlation. weight is (Cout, Cin, kh, kw); bias may be empty.
// Output spatial dims follow floor((H + 2p - k) / s) + 1.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const VectorX<Scalar>& bias, int stride = 1, int padding = 0) {
    require_feature_map(input, "conv2d input");
    if (weight.rank() != 4) throw ValidationError("conv2d weight must be (Cout,Cin,kh,kw)");
    if (stride < 1 || padding < 0) throw ValidationError("conv2d: bad stride/padding");
    const int c_out = weight.shape[0];
    const int c_in = weight.shape[1];
    const int kh = weight.shape[2];
    const int kw = weight.shape[3];
    if (c_in != input.channels())
        throw ValidationError("conv2d: weight expects " + std::to_string(c_in) +
                              " input channels, got " + std::to_string(input.channels()));
    if (bias.size() != 0 && bias.size() != c_out)
        throw ValidationError("conv2d: bias length does not match output channels");

    const int H = input.height();
    const int W = input.width();
    const int out_h = (H + 2 * padding - kh) / stride + 1;
    const int out_w = (W + 2 * padding - kw) / stride + 1;
    if (out_h < 1 || out_w < 1) throw ValidationError("conv2d: kernel larger than padded input");

    Tensor<Scalar> out({c_out, out_h, out_w});
    const auto w_at = [&](int co, int ci, int ky, int kx) {
        return weight.data[((static_cast<Eigen::Index>(co) * c_in + ci) * kh + ky) * kw + kx];
    };
    for (int co = 0; co < c_out; ++co) {
        const Scalar b = bias.size() ? bias[co] : Scalar(0);
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                Scalar acc = b;
                const int y0 = oy * stride - padding;
                const int x0 = ox * stride - padding;
                for (int ci = 0; ci < c_in; ++ci)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int y = y0 + ky;
                        if (y < 0 || y >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int x = x0 + kx;
                            if (x < 0 || x >= W) continue;
                            acc += w_at(co, ci, ky, kx) * input.at(ci, y, x);
                        }
                    }
                out.at(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
}

// Channel MLP (shared for avg- and max-pooled descriptors) plus a k x k
// spatial convolution over the stacked channelwise avg/max maps.
template <typename Scalar>
struct CbamParams {
    MatrixX<Scalar> mlp_w1;          // (C/r, C)
    VectorX<Scalar> mlp_b1;          // (C/r) or empty
    MatrixX<Scalar> mlp_w2;          // (C, C/r)
    VectorX<Scalar> mlp_b2;          // (C) or empty
    Tensor<Scalar> spatial_kernel;   // (1, 2, k, k), k odd
    Scalar spatial_bias{0};
};

template <typename Scalar>
void require_consistent(const CbamParams<Scalar>& p, int channels) {
    const auto hidden = p.mlp_w1.rows();
    if (p.mlp_w1.cols() != channels || p.mlp_w2.rows() != channels ||
        p.mlp_w2.cols() != hidden || hidden < 1)
        throw ValidationError("cbam: channel MLP dimensions do not match C=" +
                              std::to_string(channels));
    if (p.mlp_b1.size() != 0 && p.mlp_b1.size() != hidden)
        throw ValidationError("cbam: b1 length mismatch");
    if (p.mlp_b2.size() != 0 && p.mlp_b2.size() != channels)
        throw ValidationError("cbam: b2 length mismatch");
    if (p.spatial_kernel.rank() != 4 || p.spatial_kernel.shape[0] != 1 ||
        p.spatial_kernel.shape[1] != 2 || p.spatial_kernel.shape[2] != p.spatial_kernel.shape[3] ||
        p.spatial_kernel.shape[2] % 2 == 0)
        throw ValidationError("cbam: spatial kernel must be (1,2,k,k) with odd k");
}

template <typename Scalar>
struct CbamAttention {
    VectorX<Scalar> channel;                                        // (C), each in (0,1)
    Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> spatial;   // (H,W), each in (0,1)
};

template <typename Scalar>
Tensor<Scalar> cbam(const Tensor<Scalar>& input, const CbamParams<Scalar>& params,
                    CbamAttention<Scalar>* attention_out = nullptr) {
    require_feature_map(input, "cbam input");
    require_consistent(params, input.channels());
    const int C = input.channels();
    const int H = input.height();
    const int W = input.width();

    const auto mlp = [&](const VectorX<Scalar>& x) -> VectorX<Scalar> {
        VectorX<Scalar> h = params.mlp_w1 * x;
        if (params.mlp_b1.size()) h += params.mlp_b1;
        h = h.cwiseMax(Scalar(0));
        VectorX<Scalar> y = params.mlp_w2 * h;
        if (params.mlp_b2.size()) y += params.mlp_b2;
        return y;
    };

    VectorX<Scalar> avg_desc(C), max_desc(C);
    for (int c = 0; c < C; ++c) {
        avg_desc[c] = input.plane(c).mean();
        max_desc[c] = input.plane(c).maxCoeff();
    }
    const VectorX<Scalar> pre = mlp(avg_desc) + mlp(max_desc);
    VectorX<Scalar> channel_att(C);
    for (int c = 0; c < C; ++c) channel_att[c] = sigmoid(pre[c]);

    Tensor<Scalar> refined = input;
    for (int c = 0; c < C; ++c) refined.plane(c) *= channel_att[c];

    // Spatial attention over the channel-refined map.
    Tensor<Scalar> pooled({2, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Scalar sum = 0, mx = refined.at(0, y, x);
            for (int c = 0; c < C; ++c) {
                const Scalar v = refined.at(c, y, x);
                sum += v;
                mx = std::max(mx, v);
            }
            pooled.at(0, y, x) = sum / Scalar(C);
            pooled.at(1, y, x) = mx;
        }
    const int k = params.spatial_kernel.shape[2];
    VectorX<Scalar> sp_bias(1);
    sp_bias[0] = params.spatial_bias;
    Tensor<Scalar> sp_pre = conv2d(pooled, params.spatial_kernel, sp_bias, 1, (k - 1) / 2);

    Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> spatial_att(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) spatial_att(y, x) = sigmoid(sp_pre.at(0, y, x));

    Tensor<Scalar> out = refined;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at(c, y, x) *= spatial_att(y, x);

    if (attention_out) {
        attention_out->channel = channel_att;
        attention_out->spatial = spatial_att;
    }
    return out;
}

// Concat -> 1x1 reduce conv -> CBAM (the fusion block between the two
// backbone streams).
template <typename Scalar>
struct FusionParams {
    MatrixX<Scalar> reduce_weight;  // (C, 2C)
    VectorX<Scalar> reduce_bias;    // (C) or empty
    CbamParams<Scalar> cbam;
};

template <typename Scalar>
Tensor<Scalar> fuse(const Tensor<Scalar>& stream_a, const Tensor<Scalar>& stream_b,
                    const FusionParams<Scalar>& params,
                    CbamAttention<Scalar>* attention_out = nullptr) {
    require_feature_map(stream_a, "fuse stream_a");
    require_feature_map(stream_b, "fuse stream_b");
    if (stream_a.shape != stream_b.shape)
        throw ValidationError("fuse: streams must share shape");
    const int C = stream_a.channels();
    if (params.reduce_weight.rows() != C || params.reduce_weight.cols() != 2 * C)
        throw ValidationError("fuse: reduce conv must map 2C -> C channels");
    if (params.reduce_bias.size() != 0 && params.reduce_bias.size() != C)
        throw ValidationError("fuse: reduce bias length mismatch");

    Tensor<Scalar> concat({2 * C, stream_a.height(), stream_a.width()});
    concat.data.head(stream_a.data.size()) = stream_a.data;
    concat.data.tail(stream_b.data.size()) = stream_b.data;

    Tensor<Scalar> reduced({C, stream_a.height(), stream_a.width()});
    reduced.as_planes() = params.reduce_weight * concat.as_planes();
    if (params.reduce_bias.size())
        reduced.as_planes().colwise() += params.reduce_bias;

    return cbam(reduced, params.cbam, attention_out);
}

// Upsampling by bilinear point sampling at grid positions displaced by
// learned, clamped offsets. Offsets come from a linear projection of the
// coarse-cell feature vector: entries (2*(j*scale+i), 2*(j*scale+i)+1) hold
// (dx, dy) for sub-position (j, i), in input-pixel units.
template <typename Scalar>
struct DySampleParams {
    int scale{2};
    MatrixX<Scalar> offset_weight;  // (2*scale^2, C)
    VectorX<Scalar> offset_bias;    // (2*scale^2) or empty
    Scalar offset_range{Scalar(0.5)};
};

template <typename Scalar>
Tensor<Scalar> dysample(const Tensor<Scalar>& input, const DySampleParams<Scalar>& params) {
    require_feature_map(input, "dysample input");
    const int C = input.channels();
    const int H = input.height();
    const int W = input.width();
    const int s = params.scale;
    if (s < 2) throw ValidationError("dysample: scale must be >= 2");
    if (!(params.offset_range > Scalar(0)))
        throw ValidationError("dysample: offset_range must be positive");
    const int n_off = 2 * s * s;
    if (params.offset_weight.rows() != n_off || params.offset_weight.cols() != C)
        throw ValidationError("dysample: offset projection must be (2*scale^2, C)");
    if (params.offset_bias.size() != 0 && params.offset_bias.size() != n_off)
        throw ValidationError("dysample: offset bias length mismatch");

    Tensor<Scalar> out({C, H * s, W * s});
    VectorX<Scalar> cell(C);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) cell[c] = input.at(c, y, x);
            VectorX<Scalar> off = params.offset_weight * cell;
            if (params.offset_bias.size()) off += params.offset_bias;
            off = off.cwiseMin(params.offset_range).cwiseMax(-params.offset_range);

            for (int j = 0; j < s; ++j) {
                for (int i = 0; i < s; ++i) {
                    const int oy = y * s + j;
                    const int ox = x * s + i;
                    const Scalar base_y = (Scalar(oy) + Scalar(0.5)) / Scalar(s) - Scalar(0.5);
                    const Scalar base_x = (Scalar(ox) + Scalar(0.5)) / Scalar(s) - Scalar(0.5);
                    const Scalar dx = off[2 * (j * s + i)];
                    const Scalar dy = off[2 * (j * s + i) + 1];
                    for (int c = 0; c < C; ++c)
                        out.at(c, oy, ox) = bilinear_sample(input, c, base_x + dx, base_y + dy);
                }
            }
        }
    }
    return out;
}

// Stride pyramid for the detection heads. The default includes the stride-4
// head (high-resolution map for small objects) and the stride-64 head (large
// receptive field for big ones).
struct HeadPyramidConfig {
    ImageSize input_size{640, 640};
    std::vector<int> strides{4, 8, 16, 32, 64};
};

struct HeadShape {
    int stride{0};
    int height{0};
    int width{0};

    friend bool operator==(const HeadShape& a, const HeadShape& b) {
        return a.stride == b.stride && a.height == b.height && a.width == b.width;
    }
};

inline std::vector<HeadShape> head_pyramid(const HeadPyramidConfig& config) {
    require_valid(config.input_size);
    if (config.strides.empty()) throw ValidationError("head_pyramid: no strides configured");
    int prev = 0;
    for (int s : config.strides) {
        if (s < 1 || (s & (s - 1)) != 0)
            throw ValidationError("head_pyramid: strides must be powers of two");
        if (s <= prev) throw ValidationError("head_pyramid: strides must be strictly increasing");
        prev = s;
    }
    const int max_stride = config.strides.back();
    if (config.input_size.width % max_stride != 0 || config.input_size.height % max_stride != 0)
        throw ValidationError("head_pyramid: input size " + std::to_string(config.input_size.width) +
                              "x" + std::to_string(config.input_size.height) +
                              " not divisible by max stride " + std::to_string(max_stride));

    std::vector<HeadShape> shapes;
    shapes.reserve(config.strides.size());
    for (int s : config.strides)
        shapes.push_back({s, config.input_size.height / s, config.input_size.width / s});
    return shapes;
}

}  // namespace stad
