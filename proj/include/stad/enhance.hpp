#pragma once

#include <cstdint>
#include <thread>
#include <vector>

#include "stad/errors.hpp"
#include "stad/raster.hpp"

namespace stad {

// Gamma correction maps v -> v^(1/gamma); gamma > 1 brightens, which is the
// point of applying it to night scenes.
template <typename Scalar>
struct GammaParams {
    Scalar gamma{2};
};

using GammaParamsd = GammaParams<double>;

template <typename Scalar>
Raster<Scalar> gamma_correct(const Raster<Scalar>& image, const GammaParams<Scalar>& params) {
    if (!(params.gamma > Scalar(0)))
        throw ValidationError("gamma must be positive");
    require_valid(image);
    Raster<Scalar> out = image;
    out.data = image.data.pow(Scalar(1) / params.gamma);
    return out;
}

// Cumulative-distribution mapping over 256 intensity bins. Single-channel
// input is equalized directly; RGB is equalized on ITU-R 601 luma and every
// channel is rescaled by the per-pixel luma gain (black stays black).
template <typename Scalar>
Raster<Scalar> hist_equalize(const Raster<Scalar>& image) {
    require_valid(image);
    constexpr int kBins = 256;
    const auto bin = [](Scalar v) {
        int b = static_cast<int>(std::lround(static_cast<double>(v) * (kBins - 1)));
        return std::min(std::max(b, 0), kBins - 1);
    };

    const int n_pixels = image.width * image.height;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> luma(n_pixels);
    if (image.channels == 1) {
        luma = image.data;
    } else {
        for (int i = 0; i < n_pixels; ++i) {
            const Eigen::Index base = static_cast<Eigen::Index>(i) * 3;
            luma[i] = Scalar(0.299) * image.data[base] + Scalar(0.587) * image.data[base + 1] +
                      Scalar(0.114) * image.data[base + 2];
        }
    }

    std::int64_t histogram[kBins] = {0};
    for (int i = 0; i < n_pixels; ++i) histogram[bin(luma[i])] += 1;
    Scalar cdf[kBins];
    std::int64_t running = 0;
    for (int b = 0; b < kBins; ++b) {
        running += histogram[b];
        cdf[b] = static_cast<Scalar>(running) / static_cast<Scalar>(n_pixels);
    }

    Raster<Scalar> out = image;
    if (image.channels == 1) {
        for (int i = 0; i < n_pixels; ++i) out.data[i] = cdf[bin(luma[i])];
    } else {
        for (int i = 0; i < n_pixels; ++i) {
            const Scalar y = luma[i];
            const Scalar gain = y > Scalar(0) ? cdf[bin(y)] / y : Scalar(0);
            const Eigen::Index base = static_cast<Eigen::Index>(i) * 3;
            for (int c = 0; c < 3; ++c)
                out.data[base + c] =
                    std::min(std::max(image.data[base + c] * gain, Scalar(0)), Scalar(1));
        }
    }
    return out;
}

// Applies gamma correction to every image; order preserved. `jobs` > 1
// parallelizes across images; per-image work is untouched, so the result is
// bitwise identical to the sequential run.
template <typename Scalar>
std::vector<Raster<Scalar>> enhance_batch(const std::vector<Raster<Scalar>>& images,
                                          const GammaParams<Scalar>& params, int jobs = 1) {
    if (!(params.gamma > Scalar(0)))
        throw ValidationError("gamma must be positive");
    std::vector<Raster<Scalar>> out(images.size());
    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                out[i] = gamma_correct(images[i], params);
            } catch (const ValidationError& e) {
                throw ValidationError("image " + std::to_string(i) + ": " + e.what());
            }
        }
    };
    if (jobs <= 1 || images.size() <= 1) {
        work(0, images.size());
        return out;
    }
    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), images.size());
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        const std::size_t begin = images.size() * w / n_workers;
        const std::size_t end = images.size() * (w + 1) / n_workers;
        workers.emplace_back([&, w, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace stad
