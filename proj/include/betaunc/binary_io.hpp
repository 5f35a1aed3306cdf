#pragma once

// Little-endian byte encoding shared by the record and checkpoint formats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "betaunc/errors.hpp"

namespace betaunc {

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    /// u32 length prefix followed by raw bytes.
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; running past the end throws DataError with the given code.
class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& buf, DataErrorCode on_truncation)
        : buf_(buf), code_(on_truncation) {}

    void bytes(void* dst, std::size_t n) {
        need(n);
        std::copy_n(buf_.data() + pos_, n, static_cast<std::uint8_t*>(dst));
        pos_ += n;
    }
    std::uint8_t u8() {
        need(1);
        return buf_[pos_++];
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (n > remaining()) throw DataError(code_, "truncated input");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_ = 0;
    DataErrorCode code_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace betaunc
