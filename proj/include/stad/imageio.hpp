#pragma once

#include <filesystem>

#include "stad/raster.hpp"

namespace stad {

// Reads any PNG as 8-bit RGB (gray/palette/alpha inputs are converted) and
// maps samples to [0,1] by v / 255.
Rasterd read_png(const std::filesystem::path& path);

// Writes a 1- or 3-channel raster as 8-bit gray/RGB PNG, mapping values by
// round(v * 255). The file is written atomically (temp + rename).
void write_png(const std::filesystem::path& path, const Rasterd& image);

}  // namespace stad
