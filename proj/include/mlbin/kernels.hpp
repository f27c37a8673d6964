#pragma once

// Multi-level MAC: products of two multi-level tensors computed from
// XNOR-popcount over every pair of planes, combined with integer shifts,
// and rescaled once by gamma = alpha_x * alpha_w.
//
// With x^ = alpha_x 2^(1-nx) sum_i s_i(x) 2^(nx-i) (same for w), the dot
// product of reconstructions is
//   2^(kx + kw + (1-nx) + (1-nw)) * sum_ij 2^((nx-i) + (nw-j)) * xnor_dot(x_i, w_j)
// so the integer part stays exact and gamma only moves the binary point.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlbin/error.hpp"
#include "mlbin/quantization.hpp"
#include "mlbin/tensor.hpp"

namespace mlbin {

/// Exact value acc * 2^gamma_exp.
struct ScaledAccumulator {
    std::int64_t acc = 0;
    int gamma_exp = 0;

    friend bool operator==(const ScaledAccumulator&, const ScaledAccumulator&) = default;
};

enum class DotPath { bitplane, integer };

namespace detail {

inline int gamma_exponent(const MultiLevelTensor& x, const MultiLevelTensor& w) {
    return x.alpha_exp() + w.alpha_exp() + (1 - x.levels()) + (1 - w.levels());
}

inline void check_dot_operands(const MultiLevelTensor& x, const MultiLevelTensor& w) {
    if (x.size() != w.size())
        fail(ErrorKind::dimension,
             "multi-level dot of lengths " + std::to_string(x.size()) + " and " + std::to_string(w.size()));
    require(x.size() > 0, ErrorKind::dimension, "multi-level dot of empty operands");
    // |acc| <= K (2^nx - 1)(2^nw - 1) must stay below 2^62
    const int bits = std::bit_width(x.size()) + x.levels() + w.levels();
    if (bits > 62)
        fail(ErrorKind::numeric, "accumulator bound K(2^nx-1)(2^nw-1) exceeds 2^62 for K=" + std::to_string(x.size()));
}

}  // namespace detail

inline ScaledAccumulator ml_dot_bitplane(const MultiLevelTensor& x, const MultiLevelTensor& w) {
    detail::check_dot_operands(x, w);
    const int nx = x.levels(), nw = w.levels();
    const auto n = static_cast<std::int64_t>(x.size());
    const auto mask = BitPlane::tail_mask(x.size());
    std::int64_t acc = 0;
    // xnor_popcount_dot per plane pair, inlined: lengths are already checked
    for (int i = 0; i < nx; ++i) {
        const auto wa = x.planes()[static_cast<std::size_t>(i)].words();
        const std::size_t last = wa.size() - 1;
        for (int j = 0; j < nw; ++j) {
            const auto wb = w.planes()[static_cast<std::size_t>(j)].words();
            std::int64_t matches = 0;
            for (std::size_t k = 0; k < last; ++k) matches += std::popcount(~(wa[k] ^ wb[k]));
            matches += std::popcount(~(wa[last] ^ wb[last]) & mask);
            acc += (2 * matches - n) * (std::int64_t{1} << ((nx - 1 - i) + (nw - 1 - j)));
        }
    }
    return {acc, detail::gamma_exponent(x, w)};
}

/// Same product through the odd-integer codes, one fixed-point multiply per element.
inline ScaledAccumulator ml_dot_integer(const MultiLevelTensor& x, const MultiLevelTensor& w) {
    detail::check_dot_operands(x, w);
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += x.odd_code(k) * w.odd_code(k);
    return {acc, detail::gamma_exponent(x, w)};
}

inline ScaledAccumulator ml_dot(const MultiLevelTensor& x, const MultiLevelTensor& w, DotPath path) {
    return path == DotPath::bitplane ? ml_dot_bitplane(x, w) : ml_dot_integer(x, w);
}

/// acc * 2^gamma_exp as binary64. Refuses inputs outside the window where
/// the result is guaranteed exact.
inline double shift_scale(const ScaledAccumulator& a) {
    constexpr std::int64_t acc_limit = std::int64_t{1} << 52;
    if (a.acc <= -acc_limit || a.acc >= acc_limit)
        detail::fail(ErrorKind::numeric, "accumulator " + std::to_string(a.acc) + " outside the exact shift window");
    if (a.gamma_exp < -60 || a.gamma_exp > 60)
        detail::fail(ErrorKind::numeric,
                     "gamma exponent " + std::to_string(a.gamma_exp) + " outside the exact shift window");
    return std::ldexp(static_cast<double>(a.acc), a.gamma_exp);
}

/// y[r] = shift_scale(dot(W_r, x)) + bias[r] over pre-split weight rows.
inline std::vector<double> ml_matvec(std::span<const MultiLevelTensor> rows, const MultiLevelTensor& x,
                                     std::optional<std::span<const double>> bias = std::nullopt,
                                     DotPath path = DotPath::bitplane) {
    if (bias) detail::require(bias->size() == rows.size(), ErrorKind::dimension, "bias length does not match rows");
    std::vector<double> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        y[r] = shift_scale(ml_dot(rows[r], x, path));
        if (bias) y[r] += (*bias)[r];
    }
    return y;
}

inline std::vector<double> ml_matvec(const MultiLevelTensor& w, const MultiLevelTensor& x,
                                     std::optional<std::span<const double>> bias = std::nullopt,
                                     DotPath path = DotPath::bitplane) {
    if (!(w.shape().size() == 2 && x.shape().size() == 1 && w.shape()[1] == x.shape()[0]))
        detail::fail(ErrorKind::dimension, "ml_matvec of " + shape_str(w.shape()) + " by " + shape_str(x.shape()));
    const auto rows = w.split_rows();
    return ml_matvec(std::span<const MultiLevelTensor>(rows), x, bias, path);
}

}  // namespace mlbin
