#include "stad/imageio.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "stad/errors.hpp"

namespace stad {

namespace fs = std::filesystem;

Rasterd read_png(const fs::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw IoError("cannot read PNG '" + path.string() + "': " + image.message);

    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw IoError("cannot decode PNG '" + path.string() + "': " + message);
    }

    Rasterd out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
    for (Eigen::Index i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<double>(buffer[static_cast<std::size_t>(i)]) / 255.0;
    return out;
}

void write_png(const fs::path& path, const Rasterd& image) {
    require_valid(image, "png output");

    std::vector<png_byte> buffer(static_cast<std::size_t>(image.data.size()));
    for (Eigen::Index i = 0; i < image.data.size(); ++i) {
        const double v = std::lround(image.data[i] * 255.0);
        buffer[static_cast<std::size_t>(i)] = static_cast<png_byte>(std::min(255.0, std::max(0.0, v)));
    }

    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(image.width);
    out.height = static_cast<png_uint_32>(image.height);
    out.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    const fs::path tmp = path.string() + ".tmp";
    if (!png_image_write_to_file(&out, tmp.string().c_str(), 0, buffer.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path.string() + "': " + out.message);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

}  // namespace stad
