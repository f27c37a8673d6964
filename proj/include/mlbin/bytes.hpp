#pragma once

// Little-endian encode/decode helpers shared by every on-disk format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "mlbin/error.hpp"

namespace mlbin::bytes {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
inline void put_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(raw[sizeof(T) - 1 - i]);
    } else {
        out.insert(out.end(), raw, raw + sizeof(T));
    }
}

/// Sequential reader over a byte buffer; running past the end throws `truncated`.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> buf, std::string what = "buffer")
        : buf_(buf), what_(std::move(what)) {}

    template <typename T>
    T get_le() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        std::uint8_t raw[sizeof(T)];
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < sizeof(T); ++i) raw[i] = buf_[pos_ + sizeof(T) - 1 - i];
        } else {
            std::memcpy(raw, buf_.data() + pos_, sizeof(T));
        }
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n)
            detail::fail(ErrorKind::truncated, what_ + ": need " + std::to_string(n) + " bytes at offset " +
                                                   std::to_string(pos_) + ", have " +
                                                   std::to_string(buf_.size() - pos_));
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return buf_.size() - pos_; }

private:
    std::span<const std::uint8_t> buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace mlbin::bytes
