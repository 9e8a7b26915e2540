#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stad/errors.hpp"
#include "stad/raster.hpp"
#include "stad/rng.hpp"
#include "stad/types.hpp"

namespace stad {

template <typename Scalar>
struct LabeledBox {
    Box<Scalar> box;
    CategoryId category{0};

    friend bool operator==(const LabeledBox& a, const LabeledBox& b) {
        return a.box == b.box && a.category == b.category;
    }
};

template <typename Scalar>
struct AnnotatedImage {
    Raster<Scalar> image;
    std::vector<LabeledBox<Scalar>> boxes;
};

using AnnotatedImaged = AnnotatedImage<double>;

template <typename Scalar>
void require_valid(const AnnotatedImage<Scalar>& annotated, const std::string& what) {
    require_valid(annotated.image, what);
    for (std::size_t i = 0; i < annotated.boxes.size(); ++i)
        if (!box_valid(annotated.boxes[i].box))
            throw ValidationError(what + ": boxes[" + std::to_string(i) + "] outside [0,1]");
}

struct MosaicParams {
    ImageSize output_size{640, 640};
    double center_x{0.5}, center_y{0.5};
    double jitter_min{0.25}, jitter_max{0.75};
    double min_visible_fraction{0.25};
};

inline void require_valid(const MosaicParams& p) {
    require_valid(p.output_size);
    if (!(p.jitter_min > 0.0 && p.jitter_max < 1.0 && p.jitter_min <= p.jitter_max))
        throw ValidationError("mosaic jitter range must lie inside (0,1)");
    if (p.center_x < p.jitter_min || p.center_x > p.jitter_max ||
        p.center_y < p.jitter_min || p.center_y > p.jitter_max)
        throw ValidationError("mosaic center outside the jitter range");
    if (!(p.min_visible_fraction > 0.0 && p.min_visible_fraction <= 1.0))
        throw ValidationError("min_visible_fraction must be in (0,1]");
}

namespace detail {

// Placement of one mosaic input: uniform scale that covers its quadrant,
// anchored at the quadrant center, overflow cropped.
struct QuadrantMap {
    double qx0, qy0, qx1, qy1;  // quadrant rect, canvas pixels
    double scale;               // input px -> scaled px
    double ox, oy;              // center-crop offsets in scaled px

    double map_x(double u, int input_width) const {
        return qx0 + u * input_width * scale - ox;
    }
    double map_y(double v, int input_height) const {
        return qy0 + v * input_height * scale - oy;
    }
};

inline QuadrantMap quadrant_map(double qx0, double qy0, double qx1, double qy1,
                                int iw, int ih) {
    QuadrantMap m{qx0, qy0, qx1, qy1, 0.0, 0.0, 0.0};
    const double qw = qx1 - qx0;
    const double qh = qy1 - qy0;
    m.scale = std::max(qw / iw, qh / ih);
    m.ox = (iw * m.scale - qw) / 2.0;
    m.oy = (ih * m.scale - qh) / 2.0;
    return m;
}

}  // namespace detail

// Four inputs tiled around the configured center: input k covers quadrant k
// (row-major: top-left, top-right, bottom-left, bottom-right). Each input is
// scaled uniformly to cover its quadrant and center-cropped, so off-window
// boxes disappear and partially visible ones are clipped; survivors keep
// their category.
template <typename Scalar>
AnnotatedImage<Scalar> mosaic(const std::vector<AnnotatedImage<Scalar>>& inputs,
                              const MosaicParams& params) {
    if (inputs.size() != 4)
        throw ValidationError("mosaic requires exactly 4 inputs, got " +
                              std::to_string(inputs.size()));
    require_valid(params);
    const int channels = inputs[0].image.channels;
    for (const auto& in : inputs) {
        require_valid(in, "mosaic input");
        if (in.image.channels != channels)
            throw ValidationError("mosaic inputs must share the channel count");
    }

    const int W = params.output_size.width;
    const int H = params.output_size.height;
    const double cx = params.center_x * W;
    const double cy = params.center_y * H;
    const detail::QuadrantMap quads[4] = {
        detail::quadrant_map(0, 0, cx, cy, inputs[0].image.width, inputs[0].image.height),
        detail::quadrant_map(cx, 0, W, cy, inputs[1].image.width, inputs[1].image.height),
        detail::quadrant_map(0, cy, cx, H, inputs[2].image.width, inputs[2].image.height),
        detail::quadrant_map(cx, cy, W, H, inputs[3].image.width, inputs[3].image.height),
    };

    AnnotatedImage<Scalar> out;
    out.image = Raster<Scalar>(W, H, channels);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            const int k = (px < cx ? 0 : 1) + (py < cy ? 0 : 2);
            const auto& q = quads[k];
            const auto& src = inputs[static_cast<std::size_t>(k)].image;
            const double sx = (px - q.qx0 + q.ox) / q.scale - 0.5;
            const double sy = (py - q.qy0 + q.oy) / q.scale - 0.5;
            for (int c = 0; c < channels; ++c)
                out.image.at(x, y, c) =
                    bilinear_sample(src, static_cast<Scalar>(sx), static_cast<Scalar>(sy), c);
        }
    }

    for (int k = 0; k < 4; ++k) {
        const auto& q = quads[k];
        const auto& in = inputs[static_cast<std::size_t>(k)];
        for (const auto& lb : in.boxes) {
            const double bx1 = q.map_x(lb.box.x1, in.image.width);
            const double bx2 = q.map_x(lb.box.x2, in.image.width);
            const double by1 = q.map_y(lb.box.y1, in.image.height);
            const double by2 = q.map_y(lb.box.y2, in.image.height);
            const double full_area = (bx2 - bx1) * (by2 - by1);
            if (full_area <= 0.0) continue;

            const double cx1 = std::max(bx1, q.qx0);
            const double cy1 = std::max(by1, q.qy0);
            const double cx2 = std::min(bx2, q.qx1);
            const double cy2 = std::min(by2, q.qy1);
            if (cx2 <= cx1 || cy2 <= cy1) continue;
            if ((cx2 - cx1) * (cy2 - cy1) / full_area < params.min_visible_fraction) continue;

            Box<Scalar> mapped{static_cast<Scalar>(cx1 / W), static_cast<Scalar>(cy1 / H),
                               static_cast<Scalar>(cx2 / W), static_cast<Scalar>(cy2 / H)};
            box_clamp_to_unit(mapped, Scalar(1e-9));
            out.boxes.push_back({mapped, lb.category});
        }
    }
    return out;
}

// Pixelwise blend lambda * a + (1 - lambda) * b; annotations are the plain
// union of both lists (full-weight labels).
template <typename Scalar>
AnnotatedImage<Scalar> mixup(const AnnotatedImage<Scalar>& a, const AnnotatedImage<Scalar>& b,
                             Scalar lambda) {
    if (a.image.width != b.image.width || a.image.height != b.image.height ||
        a.image.channels != b.image.channels)
        throw ValidationError("mixup inputs must share dimensions");
    if (!(lambda >= Scalar(0) && lambda <= Scalar(1)))
        throw ValidationError("mixup lambda must be in [0,1]");
    require_valid(a, "mixup input a");
    require_valid(b, "mixup input b");

    AnnotatedImage<Scalar> out;
    out.image = a.image;
    out.image.data = lambda * a.image.data + (Scalar(1) - lambda) * b.image.data;
    out.boxes = a.boxes;
    out.boxes.insert(out.boxes.end(), b.boxes.begin(), b.boxes.end());
    return out;
}

// Crops each selected source box region and pastes it at a seeded random
// location fully inside the target, overwriting pixels; the new annotation
// is appended with the source category. Target annotations are untouched.
template <typename Scalar>
AnnotatedImage<Scalar> copy_paste(const AnnotatedImage<Scalar>& source,
                                  const AnnotatedImage<Scalar>& target,
                                  const std::vector<std::size_t>& selection,
                                  std::uint64_t seed) {
    if (source.image.channels != target.image.channels)
        throw ValidationError("copy_paste inputs must share the channel count");
    require_valid(source, "copy_paste source");
    require_valid(target, "copy_paste target");

    AnnotatedImage<Scalar> out = target;
    std::mt19937_64 rng(seed);
    const int tw = target.image.width;
    const int th = target.image.height;

    for (const std::size_t idx : selection) {
        if (idx >= source.boxes.size())
            throw ValidationError("copy_paste: selection index " + std::to_string(idx) +
                                  " out of range");
        const auto& lb = source.boxes[idx];
        const int sx0 = static_cast<int>(std::lround(double(lb.box.x1) * source.image.width));
        const int sx1 = static_cast<int>(std::lround(double(lb.box.x2) * source.image.width));
        const int sy0 = static_cast<int>(std::lround(double(lb.box.y1) * source.image.height));
        const int sy1 = static_cast<int>(std::lround(double(lb.box.y2) * source.image.height));
        const int w = sx1 - sx0;
        const int h = sy1 - sy0;
        if (w > tw || h > th)
            throw ValidationError("copy_paste: selected region " + std::to_string(w) + "x" +
                                  std::to_string(h) + " does not fit the target");

        const int dx0 = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(tw - w + 1)));
        const int dy0 = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(th - h + 1)));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < target.image.channels; ++c)
                    out.image.at(dx0 + x, dy0 + y, c) = source.image.at(sx0 + x, sy0 + y, c);

        Box<Scalar> pasted{static_cast<Scalar>(double(dx0) / tw), static_cast<Scalar>(double(dy0) / th),
                           static_cast<Scalar>(double(dx0 + w) / tw),
                           static_cast<Scalar>(double(dy0 + h) / th)};
        out.boxes.push_back({pasted, lb.category});
    }
    return out;
}

}  // namespace stad
