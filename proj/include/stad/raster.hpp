#pragma once

#include <Eigen/Core>

#include <string>

#include "stad/errors.hpp"
#include "stad/types.hpp"

namespace stad {

// H x W x C image of reals in [0,1], row-major, channel-interleaved:
// data[(y * width + x) * channels + c].
template <typename Scalar>
struct Raster {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    int width{0};
    int height{0};
    int channels{0};
    Array data;

    Raster() = default;
    Raster(int w, int h, int c, Scalar fill = Scalar(0))
        : width(w), height(h), channels(c),
          data(Array::Constant(static_cast<Eigen::Index>(w) * h * c, fill)) {
        if (w < 1 || h < 1 || (c != 1 && c != 3))
            throw ValidationError("raster must be at least 1x1 with 1 or 3 channels");
    }

    Eigen::Index index(int x, int y, int c) const {
        return (static_cast<Eigen::Index>(y) * width + x) * channels + c;
    }
    Scalar& at(int x, int y, int c) { return data[index(x, y, c)]; }
    Scalar at(int x, int y, int c) const { return data[index(x, y, c)]; }

    ImageSize size() const { return {width, height}; }

    friend bool operator==(const Raster& a, const Raster& b) {
        return a.width == b.width && a.height == b.height && a.channels == b.channels &&
               (a.data == b.data).all();
    }
};

using Rasterd = Raster<double>;
using Rasterf = Raster<float>;

template <typename Scalar>
void require_valid(const Raster<Scalar>& r, const std::string& what = "raster") {
    if (r.width < 1 || r.height < 1 || (r.channels != 1 && r.channels != 3))
        throw ValidationError(what + ": bad dimensions");
    if (r.data.size() != static_cast<Eigen::Index>(r.width) * r.height * r.channels)
        throw ValidationError(what + ": data length does not match dimensions");
    if ((r.data < Scalar(0)).any() || (r.data > Scalar(1)).any())
        throw ValidationError(what + ": values outside [0,1]");
}

// Bilinear sample of one channel at (x, y) in pixel coordinates, with
// coordinates clamped to the image domain (replicate border).
template <typename Scalar>
Scalar bilinear_sample(const Raster<Scalar>& r, Scalar x, Scalar y, int c) {
    x = std::min(std::max(x, Scalar(0)), Scalar(r.width - 1));
    y = std::min(std::max(y, Scalar(0)), Scalar(r.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, r.width - 1);
    const int y1 = std::min(y0 + 1, r.height - 1);
    const Scalar fx = x - Scalar(x0);
    const Scalar fy = y - Scalar(y0);
    const Scalar top = r.at(x0, y0, c) * (Scalar(1) - fx) + r.at(x1, y0, c) * fx;
    const Scalar bot = r.at(x0, y1, c) * (Scalar(1) - fx) + r.at(x1, y1, c) * fx;
    return top * (Scalar(1) - fy) + bot * fy;
}

}  // namespace stad
