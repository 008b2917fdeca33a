#pragma once

// Little-endian helpers shared by the binary container readers/writers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <span>
#include <vector>

#include "oralnet/errors.hpp"

namespace oralnet::detail {

class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed");
        count_ += n;
    }
    template <typename T>
    void integer(T value) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf[i] = static_cast<unsigned char>(static_cast<std::uint64_t>(value) >> (8 * i));
        bytes(buf, sizeof(T));
    }
    void floats(std::span<const float> values) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(values.data(), values.size_bytes());
        } else {
            for (float v : values) integer(std::bit_cast<std::uint32_t>(v));
        }
    }
    std::uint64_t count() const noexcept { return count_; }

private:
    std::ostream& out_;
    std::uint64_t count_ = 0;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : data_(bytes) {}

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    const std::uint8_t* take(std::size_t n) {
        if (n > remaining()) throw FormatError("truncated");
        const std::uint8_t* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename T>
    T integer() {
        const std::uint8_t* p = take(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return static_cast<T>(v);
    }
    bool at_end() const noexcept { return pos_ == data_.size(); }

private:
    const std::vector<std::uint8_t>& data_;
    std::size_t pos_ = 0;
};

inline std::vector<float> decode_floats(const std::uint8_t* payload, std::size_t count) {
    std::vector<float> values(count);
    if constexpr (std::endian::native == std::endian::little) {
        if (count) std::memcpy(values.data(), payload, count * 4);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
            values[i] = std::bit_cast<float>(bits);
        }
    }
    return values;
}

}  // namespace oralnet::detail
