#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "clvid/error.hpp"

namespace clvid::io {

// Little-endian writers/readers over byte vectors, independent of host order.
inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }

    void need(std::size_t n, const char* field) const {
        if (remaining() < n)
            throw FormatError(what_ + ": truncated " + field + ", expected " + std::to_string(n) + " bytes, found " +
                                  std::to_string(remaining()),
                              pos_);
    }

    std::uint8_t u8(const char* field) {
        need(1, field);
        return bytes_[pos_++];
    }

    std::uint16_t u16(const char* field) {
        need(2, field);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }

    double f64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 8;
        double d;
        std::memcpy(&d, &v, sizeof d);
        return d;
    }

    std::string str(std::size_t n, const char* field) {
        need(n, field);
        std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
        pos_ += n;
        return s;
    }

    const std::uint8_t* take(std::size_t n, const char* field) {
        need(n, field);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + path + "'");
}

} // namespace clvid::io
