#pragma once

// Quantizers: sign and stochastic binarization, greedy residual
// multi-level binarization with power-of-two scales, and the symmetric
// fixed-point baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mlbin/error.hpp"
#include "mlbin/tensor.hpp"

namespace mlbin {

/// +1 for x >= 0, -1 otherwise.
inline int sign_binarize(double x) noexcept { return x >= 0.0 ? 1 : -1; }

inline double hard_sigmoid(double x) noexcept { return std::max(0.0, std::min(1.0, (x + 1.0) / 2.0)); }

/// +1 iff u < hard_sigmoid(x). The caller supplies u so the result is reproducible.
inline int stochastic_binarize(double x, double u) {
    detail::require(u >= 0.0 && u < 1.0, ErrorKind::validation, "uniform sample must lie in [0,1)");
    return u < hard_sigmoid(x) ? 1 : -1;
}

/// 2^k as a double.
inline double pow2(int k) noexcept { return std::ldexp(1.0, k); }

struct LevelDecomposition {
    std::vector<int> signs;  // s_1..s_n, each +-1
    double residual = 0.0;
};

/// Greedy residual binarization: level i takes the sign of the running
/// residual and subtracts it at scale alpha * 2^(1-i).
inline LevelDecomposition multi_level_binarize(double x, int levels, int alpha_exp) {
    detail::require(levels >= 1, ErrorKind::validation, "level count must be at least 1");
    detail::require(std::isfinite(x), ErrorKind::validation, "cannot binarize a non-finite value");
    LevelDecomposition out;
    out.signs.reserve(static_cast<std::size_t>(levels));
    double r = x;
    for (int i = 1; i <= levels; ++i) {
        const int s = sign_binarize(r);
        out.signs.push_back(s);
        r -= s * pow2(alpha_exp + 1 - i);
    }
    out.residual = r;
    return out;
}

/// alpha * sum_i s_i * 2^(1-i).
inline double reconstruct(std::span<const int> signs, int alpha_exp) noexcept {
    double v = 0.0;
    for (std::size_t i = 0; i < signs.size(); ++i) v += signs[i] * pow2(alpha_exp - static_cast<int>(i));
    return v;
}

/// sum_i s_i * 2^(n-i); always odd with magnitude at most 2^n - 1.
inline std::int64_t to_odd_integer(std::span<const int> signs) noexcept {
    std::int64_t o = 0;
    for (int s : signs) o = 2 * o + s;
    return o;
}

/// A tensor stored as n sign planes plus one power-of-two scale 2^alpha_exp.
/// Element e reconstructs to alpha * sum_i s_i(e) * 2^(1-i).
class MultiLevelTensor {
public:
    static constexpr int max_levels = 30;

    MultiLevelTensor() = default;

    MultiLevelTensor(Shape shape, int alpha_exp, std::vector<BitPlane> planes)
        : shape_(std::move(shape)), alpha_exp_(alpha_exp), planes_(std::move(planes)) {
        if (planes_.empty() || planes_.size() > max_levels)
            detail::fail(ErrorKind::structural, "multi-level tensor needs 1.." + std::to_string(max_levels) +
                                                    " planes, got " + std::to_string(planes_.size()));
        const auto n = shape_size(shape_);
        for (std::size_t i = 0; i < planes_.size(); ++i)
            if (planes_[i].length() != n)
                detail::fail(ErrorKind::structural, "plane " + std::to_string(i) + " has length " +
                                                        std::to_string(planes_[i].length()) + ", shape " +
                                                        shape_str(shape_) + " needs " + std::to_string(n));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return planes_.empty() ? 0 : planes_.front().length(); }
    int levels() const noexcept { return static_cast<int>(planes_.size()); }
    int alpha_exp() const noexcept { return alpha_exp_; }
    const std::vector<BitPlane>& planes() const noexcept { return planes_; }
    const BitPlane& plane(int level) const { return planes_.at(static_cast<std::size_t>(level)); }

    std::vector<int> signs(std::size_t e) const {
        std::vector<int> s(planes_.size());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = planes_[i].sign(e);
        return s;
    }

    std::int64_t odd_code(std::size_t e) const {
        std::int64_t o = 0;
        for (const auto& p : planes_) o = 2 * o + p.sign(e);
        return o;
    }

    /// Exact: alpha * o * 2^(1-n) is dyadic with at most 31 significant bits.
    double value(std::size_t e) const {
        return std::ldexp(static_cast<double>(odd_code(e)), alpha_exp_ + 1 - levels());
    }

    /// Rows of a 2-D tensor as separate word-aligned 1-D tensors.
    std::vector<MultiLevelTensor> split_rows() const {
        detail::require(shape_.size() == 2, ErrorKind::dimension, "split_rows needs a matrix");
        const auto rows = shape_[0], cols = shape_[1];
        std::vector<MultiLevelTensor> out;
        out.reserve(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<BitPlane> planes;
            planes.reserve(planes_.size());
            for (const auto& p : planes_) planes.push_back(p.slice(r * cols, cols));
            out.emplace_back(Shape{cols}, alpha_exp_, std::move(planes));
        }
        return out;
    }

    friend bool operator==(const MultiLevelTensor&, const MultiLevelTensor&) = default;

private:
    Shape shape_;
    int alpha_exp_ = 0;
    std::vector<BitPlane> planes_;
};

/// Elementwise multi-level binarization of a flat value range.
template <typename T>
MultiLevelTensor quantize_values(std::span<const T> values, Shape shape, int levels, int alpha_exp) {
    if (!(levels >= 1 && levels <= MultiLevelTensor::max_levels))
        detail::fail(ErrorKind::validation, "level count " + std::to_string(levels) + " out of range");
    detail::require(shape_size(shape) == values.size(), ErrorKind::dimension, "shape does not match value count");
    const auto n = values.size();
    std::vector<std::vector<std::uint64_t>> words(static_cast<std::size_t>(levels),
                                                  std::vector<std::uint64_t>(BitPlane::words_for(n), 0));
    for (std::size_t e = 0; e < n; ++e) {
        detail::require(std::isfinite(values[e]), ErrorKind::validation, "cannot quantize a non-finite value");
        double r = values[e];
        for (int i = 0; i < levels; ++i) {
            const int s = sign_binarize(r);
            if (s > 0) words[static_cast<std::size_t>(i)][e / 64] |= std::uint64_t{1} << (e % 64);
            r -= s * pow2(alpha_exp - i);
        }
    }
    std::vector<BitPlane> planes;
    planes.reserve(words.size());
    for (auto& w : words) planes.push_back(BitPlane::from_words(n, std::move(w)));
    return MultiLevelTensor(std::move(shape), alpha_exp, std::move(planes));
}

inline MultiLevelTensor quantize_tensor(const DenseTensor& t, int levels, int alpha_exp) {
    return quantize_values(t.values(), t.shape(), levels, alpha_exp);
}

inline DenseTensor dequantize(const MultiLevelTensor& q) {
    std::vector<float> v(q.size());
    for (std::size_t e = 0; e < v.size(); ++e) v[e] = static_cast<float>(q.value(e));
    return DenseTensor(q.shape(), std::move(v));
}

struct ResidualStats {
    double max_abs = 0.0;
    double rms = 0.0;
};

inline ResidualStats residual_stats(const DenseTensor& original, const MultiLevelTensor& q) {
    detail::require(original.size() == q.size(), ErrorKind::dimension, "residual of mismatched tensors");
    ResidualStats st;
    double sq = 0.0;
    for (std::size_t e = 0; e < original.size(); ++e) {
        const double r = static_cast<double>(original[e]) - q.value(e);
        st.max_abs = std::max(st.max_abs, std::fabs(r));
        sq += r * r;
    }
    if (original.size() > 0) st.rms = std::sqrt(sq / static_cast<double>(original.size()));
    return st;
}

/// Candidate scale exponents for a tensor: every k with 2^k in
/// [max|t|/8, 2 max|t|], plus the power of two nearest mean|t|.
template <typename T>
std::vector<int> suggest_alpha(std::span<const T> values) {
    detail::require(!values.empty(), ErrorKind::validation, "suggest_alpha of an empty tensor");
    double max_abs = 0.0, sum_abs = 0.0;
    for (auto v : values) {
        detail::require(std::isfinite(v), ErrorKind::validation, "suggest_alpha of a non-finite value");
        max_abs = std::max(max_abs, std::fabs(static_cast<double>(v)));
        sum_abs += std::fabs(static_cast<double>(v));
    }
    if (max_abs == 0.0) return {0};
    std::set<int> ks;
    const double lo = max_abs / 8.0, hi = 2.0 * max_abs;
    for (int k = static_cast<int>(std::floor(std::log2(lo))); pow2(k) <= hi; ++k)
        if (pow2(k) >= lo) ks.insert(k);
    const double mean_abs = sum_abs / static_cast<double>(values.size());
    if (mean_abs > 0.0) {
        const int f = static_cast<int>(std::floor(std::log2(mean_abs)));
        // nearest of 2^f and 2^(f+1) on the linear scale, ties to the lower
        ks.insert(mean_abs - pow2(f) <= pow2(f + 1) - mean_abs ? f : f + 1);
    }
    return {ks.begin(), ks.end()};
}

inline std::vector<int> suggest_alpha(const DenseTensor& t) { return suggest_alpha(t.values()); }

/// Smallest k with 2 * 2^k >= max|t|: the scale whose codebook covers the
/// value range without clipping.
template <typename T>
int covering_alpha(std::span<const T> values) {
    double max_abs = 0.0;
    for (auto v : values) max_abs = std::max(max_abs, std::fabs(static_cast<double>(v)));
    if (max_abs == 0.0) return 0;
    int k = static_cast<int>(std::ceil(std::log2(max_abs))) - 1;
    while (pow2(k + 1) < max_abs) ++k;
    while (pow2(k) >= max_abs) --k;
    return k;
}

/// Candidate exponent with the lowest mean squared reconstruction error;
/// ties go to the earlier candidate.
template <typename T>
int fit_alpha_mse(std::span<const T> values, int levels, std::span<const int> candidates) {
    detail::require(!candidates.empty(), ErrorKind::validation, "no scale candidates");
    int best = candidates.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (int k : candidates) {
        double err = 0.0;
        for (auto v : values) {
            const double r = multi_level_binarize(static_cast<double>(v), levels, k).residual;
            err += r * r;
        }
        if (err < best_err) {
            best_err = err;
            best = k;
        }
    }
    return best;
}

/// Symmetric two's-complement integers with a power-of-two scale:
/// value = data * 2^scale_exp, data in [-2^(b-1), 2^(b-1) - 1].
struct FixedPointTensor {
    Shape shape;
    int bits = 8;
    int scale_exp = 0;
    std::vector<std::int32_t> data;

    DenseTensor dequantize() const {
        std::vector<float> v(data.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(std::ldexp(double(data[i]), scale_exp));
        return DenseTensor(shape, std::move(v));
    }
};

inline constexpr std::int32_t fixed_point_max(int bits) noexcept { return (std::int32_t{1} << (bits - 1)) - 1; }
inline constexpr std::int32_t fixed_point_min(int bits) noexcept { return -(std::int32_t{1} << (bits - 1)); }

/// Smallest k with max_abs <= qmax * 2^k. For b = 1 the positive range is
/// empty, so the scale is picked as if qmax were 1.
inline int fixed_point_scale_exp(double max_abs, int bits) {
    if (max_abs == 0.0) return 0;
    const double qmax = std::max<std::int32_t>(fixed_point_max(bits), 1);
    int k = static_cast<int>(std::ceil(std::log2(max_abs / qmax)));
    while (qmax * pow2(k) < max_abs) ++k;
    while (qmax * pow2(k - 1) >= max_abs) --k;
    return k;
}

/// Round-half-to-even then saturate.
inline std::int32_t fixed_point_code(double v, int bits, int scale_exp) noexcept {
    const double scaled = std::nearbyint(std::ldexp(v, -scale_exp));
    return static_cast<std::int32_t>(std::clamp(scaled, double(fixed_point_min(bits)), double(fixed_point_max(bits))));
}

template <typename T>
FixedPointTensor fixed_point_quantize_at(std::span<const T> values, Shape shape, int bits, int scale_exp) {
    if (!(bits >= 1 && bits <= 16))
        detail::fail(ErrorKind::validation, "fixed-point width " + std::to_string(bits) + " outside [1,16]");
    FixedPointTensor out{std::move(shape), bits, scale_exp, {}};
    out.data.reserve(values.size());
    for (auto v : values) out.data.push_back(fixed_point_code(static_cast<double>(v), bits, scale_exp));
    return out;
}

inline FixedPointTensor fixed_point_quantize(const DenseTensor& t, int bits) {
    if (!(bits >= 1 && bits <= 16))
        detail::fail(ErrorKind::validation, "fixed-point width " + std::to_string(bits) + " outside [1,16]");
    return fixed_point_quantize_at(t.values(), t.shape(), bits, fixed_point_scale_exp(t.max_abs(), bits));
}

}  // namespace mlbin
