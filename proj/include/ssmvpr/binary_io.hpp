#ifndef SSMVPR_BINARY_IO_HPP
#define SSMVPR_BINARY_IO_HPP

#include "error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file binary_io.hpp
 *
 * @brief Little-endian primitives shared by every on-disk format.
 *
 * All formats start with a four-byte ASCII magic followed by fixed-width
 * little-endian fields. Byte order is fixed regardless of host.
 */

namespace ssmvpr::binary {

namespace detail {

template <typename Unsigned>
void put_le(std::vector<unsigned char>& out, Unsigned value) {
    for (std::size_t i = 0; i < sizeof(Unsigned); ++i) {
        out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFFu));
    }
}

template <typename Unsigned>
Unsigned get_le(const unsigned char* bytes) {
    Unsigned value = 0;
    for (std::size_t i = 0; i < sizeof(Unsigned); ++i) {
        value |= static_cast<Unsigned>(bytes[i]) << (8 * i);
    }
    return value;
}

} // namespace detail

/// Accumulates an encoded file in memory; `commit` writes it in one go.
class Writer {
public:
    void magic(std::string_view tag) {
        bytes_.insert(bytes_.end(), tag.begin(), tag.end());
    }

    void u32(std::uint32_t value) { detail::put_le(bytes_, value); }

    void f32(float value) { detail::put_le(bytes_, std::bit_cast<std::uint32_t>(value)); }

    void f64(double value) { detail::put_le(bytes_, std::bit_cast<std::uint64_t>(value)); }

    void f32s(std::span<const float> values) {
        bytes_.reserve(bytes_.size() + 4 * values.size());
        for (float v : values) {
            f32(v);
        }
    }

    const std::vector<unsigned char>& bytes() const { return bytes_; }

    void commit(const std::filesystem::path& destination) const {
        std::ofstream out(destination, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorKind::Io, "cannot open '" + destination.string() + "' for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
        out.close();
        if (!out) {
            fail(ErrorKind::Io, "failed writing '" + destination.string() + "'");
        }
    }

private:
    std::vector<unsigned char> bytes_;
};

/// Cursor over a whole file loaded into memory. Running off the end raises `Truncated`.
class Reader {
public:
    static Reader open(const std::filesystem::path& source) {
        std::ifstream in(source, std::ios::binary);
        if (!in) {
            fail(ErrorKind::Io, "cannot open '" + source.string() + "'");
        }
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (in.bad()) {
            fail(ErrorKind::Io, "failed reading '" + source.string() + "'");
        }
        return Reader(std::move(bytes), source.string());
    }

    Reader(std::vector<unsigned char> bytes, std::string label)
        : bytes_(std::move(bytes)), label_(std::move(label)) {}

    void expect_magic(std::string_view tag) {
        need(tag.size(), "magic");
        if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
            fail(ErrorKind::BadMagic, label_ + ": expected magic '" + std::string(tag) + "'");
        }
        pos_ += tag.size();
    }

    std::uint32_t u32() {
        need(4, "u32");
        auto v = detail::get_le<std::uint32_t>(bytes_.data() + pos_);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    double f64() {
        need(8, "f64");
        auto v = detail::get_le<std::uint64_t>(bytes_.data() + pos_);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    void f32s(std::span<float> out) {
        need(4 * out.size(), "float payload");
        for (auto& v : out) {
            v = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes_.data() + pos_));
            pos_ += 4;
        }
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

    const std::string& label() const { return label_; }

    void expect_end() const {
        if (remaining() != 0) {
            fail(ErrorKind::SizeMismatch,
                 label_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes");
        }
    }

private:
    void need(std::size_t count, const char* what) const {
        if (remaining() < count) {
            fail(ErrorKind::Truncated, label_ + ": truncated while reading " + what);
        }
    }

    std::vector<unsigned char> bytes_;
    std::string label_;
    std::size_t pos_ = 0;
};

} // namespace ssmvpr::binary

#endif
