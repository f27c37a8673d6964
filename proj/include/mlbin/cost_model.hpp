#pragma once

// Analytic area (gate-equivalents) and delay (gate-delays) of the
// multi-level MAC: an m x n array multiplier on the odd-integer codes, a
// ripple accumulator, and a gamma shift that is pure wiring.
//
// The full-precision baseline constants are calibration values, not a
// structural model of an FP32 MAC.

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "mlbin/error.hpp"

namespace mlbin {

struct GateCostParams {
    double and_area = 1.0;
    double and_delay = 1.0;
    double full_adder_area = 5.0;
    double full_adder_delay = 2.0;
    int accumulator_guard_bits = 0;
    double fp_baseline_area = 6100.0;
    double fp_baseline_delay = 1250.0;

    void validate() const {
        const bool ok = and_area > 0 && and_delay > 0 && full_adder_area > 0 && full_adder_delay > 0 &&
                        fp_baseline_area > 0 && fp_baseline_delay > 0 && accumulator_guard_bits >= 0;
        detail::require(ok, ErrorKind::config, "gate cost constants must be positive");
    }

    friend bool operator==(const GateCostParams&, const GateCostParams&) = default;
};

struct AreaDelay {
    double area = 0.0;
    double delay = 0.0;

    friend bool operator==(const AreaDelay&, const AreaDelay&) = default;
};

/// m x n array multiplier: m*n AND gates and (m-1)*n full adders; the
/// critical path is one AND plus m+n-2 full adders. (1,1) is a single gate.
inline AreaDelay multiplier_cost(int m, int n, const GateCostParams& gc = {}) {
    detail::require(m >= 1 && m <= 32 && n >= 1 && n <= 32, ErrorKind::validation,
                    "multiplier widths must lie in [1,32]");
    gc.validate();
    return {m * n * gc.and_area + (m - 1) * n * gc.full_adder_area, gc.and_delay + (m + n - 2) * gc.full_adder_delay};
}

inline int accumulator_width(int m, int n, std::size_t dot_length, const GateCostParams& gc) {
    int log_k = 0;
    while ((std::size_t{1} << log_k) < dot_length) ++log_k;
    return m + n + log_k + gc.accumulator_guard_bits;
}

struct CostOptions {
    bool multiplier_only_delay = false;
};

struct CostReport {
    int input_levels = 0;
    int weight_levels = 0;
    std::size_t dot_length = 0;
    AreaDelay multiplier;
    AreaDelay accumulator;
    AreaDelay shift;  // always zero: gamma rescaling is a wired shift
    double area = 0.0;
    double delay = 0.0;
    double normalized_area = 0.0;
    double normalized_delay = 0.0;

    friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// Raw cost plus normalization against the full-precision baseline of `gc`.
inline CostReport mac_cost(int m, int n, std::size_t dot_length, const GateCostParams& gc = {},
                           const CostOptions& opt = {}) {
    detail::require(dot_length >= 1, ErrorKind::validation, "dot length must be at least 1");
    CostReport r;
    r.input_levels = m;
    r.weight_levels = n;
    r.dot_length = dot_length;
    r.multiplier = multiplier_cost(m, n, gc);
    const int width = accumulator_width(m, n, dot_length, gc);
    r.accumulator = {width * gc.full_adder_area, width * gc.full_adder_delay};
    r.area = r.multiplier.area + r.accumulator.area + r.shift.area;
    r.delay = opt.multiplier_only_delay ? r.multiplier.delay + r.shift.delay
                                        : r.multiplier.delay + r.accumulator.delay + r.shift.delay;
    r.normalized_area = r.area / gc.fp_baseline_area;
    r.normalized_delay = r.delay / gc.fp_baseline_delay;
    return r;
}

enum class Normalization {
    full_precision,  // against the FP baseline constants
    max55,           // against the (5,5) configuration
};

/// Every (m, n) in [1, max_levels]^2, m outer.
inline std::vector<CostReport> cost_grid(int max_levels, std::size_t dot_length, const GateCostParams& gc = {},
                                         Normalization norm = Normalization::full_precision,
                                         const CostOptions& opt = {}) {
    detail::require(max_levels >= 1 && max_levels <= 32, ErrorKind::validation, "grid size must lie in [1,32]");
    std::vector<CostReport> out;
    const auto ref = mac_cost(5, 5, dot_length, gc, opt);
    for (int m = 1; m <= max_levels; ++m)
        for (int n = 1; n <= max_levels; ++n) {
            auto r = mac_cost(m, n, dot_length, gc, opt);
            if (norm == Normalization::max55) {
                r.normalized_area = r.area / ref.area;
                r.normalized_delay = r.delay / ref.delay;
            }
            out.push_back(r);
        }
    return out;
}

/// The (input, weight) level pairs reported alongside full precision.
inline constexpr std::array<std::pair<int, int>, 6> reference_level_pairs{
    {{3, 4}, {3, 5}, {4, 4}, {4, 5}, {5, 4}, {5, 5}}};

inline std::vector<CostReport> reference_rows(std::size_t dot_length, const GateCostParams& gc = {},
                                              const CostOptions& opt = {}) {
    std::vector<CostReport> out;
    for (auto [m, n] : reference_level_pairs) out.push_back(mac_cost(m, n, dot_length, gc, opt));
    return out;
}

inline std::string cost_csv(const std::vector<CostReport>& rows) {
    std::string out = "input_levels,weight_levels,dot_length,area,delay,normalized_area,normalized_delay\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%zu,%.6g,%.6g,%.6f,%.6f\n", r.input_levels, r.weight_levels, r.dot_length,
                      r.area, r.delay, r.normalized_area, r.normalized_delay);
        out += buf;
    }
    return out;
}

}  // namespace mlbin
