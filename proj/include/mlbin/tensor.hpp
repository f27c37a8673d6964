#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mlbin/bytes.hpp"
#include "mlbin/error.hpp"

namespace mlbin {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Row-major binary32 tensor. Values are validated finite on construction
/// and never change afterwards.
class DenseTensor {
public:
    DenseTensor() = default;

    DenseTensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_size(shape_) != data_.size())
            detail::fail(ErrorKind::dimension, "tensor shape " + shape_str(shape_) + " does not match " +
                                                   std::to_string(data_.size()) + " values");
        for (std::size_t i = 0; i < data_.size(); ++i)
            if (!std::isfinite(data_[i]))
                detail::fail(ErrorKind::validation, "non-finite tensor value at index " + std::to_string(i));
    }

    static DenseTensor zeros(Shape shape) {
        const auto n = shape_size(shape);
        return DenseTensor(std::move(shape), std::vector<float>(n, 0.0f));
    }

    static DenseTensor vector(std::vector<float> values) {
        const auto n = values.size();
        return DenseTensor({n}, std::move(values));
    }

    static DenseTensor matrix(std::size_t rows, std::size_t cols, std::vector<float> values) {
        return DenseTensor({rows, cols}, std::move(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::span<const float> values() const noexcept { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::span<const float> row(std::size_t r) const {
        const auto cols = shape_.at(1);
        return std::span<const float>(data_).subspan(r * cols, cols);
    }

    float max_abs() const noexcept {
        float m = 0.0f;
        for (float v : data_) m = std::max(m, std::fabs(v));
        return m;
    }

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

/// Packed sign bits: bit value 1 encodes +1, bit value 0 encodes -1.
/// 64-bit words, LSB-first; bits at positions >= length() are always zero.
class BitPlane {
public:
    static constexpr std::size_t word_bits = 64;

    BitPlane() = default;

    static std::size_t words_for(std::size_t n) noexcept { return (n + word_bits - 1) / word_bits; }

    static BitPlane from_words(std::size_t length, std::vector<std::uint64_t> words) {
        if (words.size() != words_for(length))
            detail::fail(ErrorKind::structural, "bit plane of length " + std::to_string(length) + " needs " +
                                                    std::to_string(words_for(length)) + " words, got " +
                                                    std::to_string(words.size()));
        if (length % word_bits != 0 && !words.empty())
            detail::require((words.back() & ~tail_mask(length)) == 0, ErrorKind::structural,
                            "bit plane has non-zero padding bits");
        BitPlane p;
        p.length_ = length;
        p.words_ = std::move(words);
        return p;
    }

    template <typename Pred>
    static BitPlane generate(std::size_t length, Pred&& is_positive) {
        std::vector<std::uint64_t> words(words_for(length), 0);
        for (std::size_t i = 0; i < length; ++i)
            if (is_positive(i)) words[i / word_bits] |= std::uint64_t{1} << (i % word_bits);
        return from_words(length, std::move(words));
    }

    std::size_t length() const noexcept { return length_; }
    std::span<const std::uint64_t> words() const noexcept { return words_; }

    bool bit(std::size_t i) const { return (words_[i / word_bits] >> (i % word_bits)) & 1u; }
    int sign(std::size_t i) const { return bit(i) ? 1 : -1; }

    BitPlane complement() const {
        std::vector<std::uint64_t> w(words_.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = ~words_[i];
        if (!w.empty() && length_ % word_bits != 0) w.back() &= tail_mask(length_);
        return from_words(length_, std::move(w));
    }

    /// Copies bits [offset, offset + count) into a fresh, word-aligned plane.
    BitPlane slice(std::size_t offset, std::size_t count) const {
        detail::require(offset + count <= length_, ErrorKind::dimension, "bit plane slice out of range");
        std::vector<std::uint64_t> w(words_for(count), 0);
        const std::size_t shift = offset % word_bits;
        const std::size_t first = offset / word_bits;
        for (std::size_t i = 0; i < w.size(); ++i) {
            std::uint64_t lo = words_[first + i] >> shift;
            if (shift != 0 && first + i + 1 < words_.size()) lo |= words_[first + i + 1] << (word_bits - shift);
            w[i] = lo;
        }
        if (!w.empty() && count % word_bits != 0) w.back() &= tail_mask(count);
        return from_words(count, std::move(w));
    }

    /// Length as u64 followed by the words, all little-endian.
    void serialize(std::vector<std::uint8_t>& out) const {
        bytes::put_le<std::uint64_t>(out, length_);
        for (auto w : words_) bytes::put_le<std::uint64_t>(out, w);
    }

    static BitPlane deserialize(bytes::Reader& in) {
        const auto length = in.get_le<std::uint64_t>();
        if (length / word_bits > in.remaining() / sizeof(std::uint64_t))
            detail::fail(ErrorKind::truncated, "bit plane of length " + std::to_string(length) + " exceeds buffer");
        const auto nwords = words_for(length);
        in.need(nwords * sizeof(std::uint64_t));
        std::vector<std::uint64_t> words(nwords);
        for (auto& w : words) w = in.get_le<std::uint64_t>();
        return from_words(length, std::move(words));
    }

    friend bool operator==(const BitPlane&, const BitPlane&) = default;

    static std::uint64_t tail_mask(std::size_t length) noexcept {
        const auto r = length % word_bits;
        return r == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << r) - 1;
    }

private:
    std::size_t length_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Bit i is set iff values[i] >= 0, so zero maps to +1.
template <typename T>
BitPlane pack_signs(std::span<const T> values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            detail::fail(ErrorKind::validation, "cannot pack sign of non-finite value at index " + std::to_string(i));
    return BitPlane::generate(values.size(), [&](std::size_t i) { return values[i] >= T{0}; });
}

inline BitPlane pack_signs(const std::vector<float>& values) { return pack_signs(std::span<const float>(values)); }
inline BitPlane pack_signs(const std::vector<double>& values) { return pack_signs(std::span<const double>(values)); }

/// Expands a plane back to a +-1 vector.
inline std::vector<int> unpack_signs(const BitPlane& plane) {
    std::vector<int> out(plane.length());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = plane.sign(i);
    return out;
}

/// Signed dot product of two +-1 vectors: 2 * popcount(xnor(a, b)) - N.
/// Padding bits are zero in both operands, so xnor sets them; the tail word
/// is masked before counting.
inline std::int64_t xnor_popcount_dot(const BitPlane& a, const BitPlane& b) {
    if (a.length() != b.length())
        detail::fail(ErrorKind::dimension, "xnor dot of planes with lengths " + std::to_string(a.length()) + " and " +
                                               std::to_string(b.length()));
    detail::require(a.length() > 0, ErrorKind::dimension, "xnor dot of empty planes");
    const auto wa = a.words();
    const auto wb = b.words();
    const std::size_t last = wa.size() - 1;
    std::int64_t matches = 0;
    for (std::size_t i = 0; i < last; ++i) matches += std::popcount(~(wa[i] ^ wb[i]));
    matches += std::popcount(~(wa[last] ^ wb[last]) & BitPlane::tail_mask(a.length()));
    return 2 * matches - static_cast<std::int64_t>(a.length());
}

/// Reference matrix-vector product; accumulates in binary64, rounds once on output.
inline DenseTensor matvec(const DenseTensor& a, const DenseTensor& x) {
    if (!(a.rank() == 2 && x.rank() == 1 && a.dim(1) == x.dim(0)))
        detail::fail(ErrorKind::dimension, "matvec of " + shape_str(a.shape()) + " by " + shape_str(x.shape()));
    const auto rows = a.dim(0);
    std::vector<float> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const auto row = a.row(r);
        for (std::size_t k = 0; k < row.size(); ++k) acc += static_cast<double>(row[k]) * x[k];
        y[r] = static_cast<float>(acc);
    }
    return DenseTensor::vector(std::move(y));
}

}  // namespace mlbin
