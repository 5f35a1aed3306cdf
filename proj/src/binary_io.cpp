#include "betaunc/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace betaunc {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(DataErrorCode::MissingFile, "cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(DataErrorCode::Io, "cannot write '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError(DataErrorCode::Io, "write failed for '" + path.string() + "'");
    }
}

}  // namespace betaunc
