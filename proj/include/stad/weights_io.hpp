#pragma once

#include <cstdint>
#include <string>

#include "stad/fusionnet.hpp"

namespace stad {

// Everything the toy network needs: the fusion block (reduce conv + CBAM)
// and the DySample upsampler.
struct FusionNetWeights {
    FusionParams<double> fusion;
    DySampleParams<double> dysample;
};

// JSON layout: {"fusion": {...}, "cbam": {...}, "dysample": {...}} with
// nested arrays for matrices; optional biases may be omitted or null.
FusionNetWeights parse_weights(const std::string& document);
std::string serialize_weights(const FusionNetWeights& weights);

// Deterministic small random weights for demos and tests.
FusionNetWeights random_weights(int channels, int reduction, int spatial_kernel, int scale,
                                std::uint64_t seed);

}  // namespace stad
