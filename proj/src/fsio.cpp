#include "stad/fsio.hpp"

#include <fstream>
#include <sstream>

#include "stad/errors.hpp"

namespace stad {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
    return buffer.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out.flush()) throw IoError("error while writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

}  // namespace stad
