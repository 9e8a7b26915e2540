#pragma once

#include <filesystem>
#include <string>

namespace stad {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place, so readers never
// observe a half-written document.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace stad
