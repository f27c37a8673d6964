#pragma once

// Post-training scale selection from observed values: the multi-level
// scheme picks each group's alpha by reconstruction error, the fixed-point
// baseline picks its activation scale from the observed range.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <utility>
#include <span>
#include <vector>

#include "mlbin/binarized_lstm.hpp"
#include "mlbin/dataset.hpp"
#include "mlbin/explorer.hpp"
#include "mlbin/lstm.hpp"
#include "mlbin/quantization.hpp"

namespace mlbin {

/// Every value the X group quantizes at run time: inputs x_t and the FP
/// hidden states h_{t-1} over the first `max_samples` sequences.
inline std::vector<float> collect_activations(const LstmParams& p, const Dataset& data, std::size_t max_samples = 64) {
    std::vector<float> out;
    const auto n = std::min(max_samples, data.samples);
    for (std::size_t s = 0; s < n; ++s) {
        const auto seq = data.sequence(s);
        out.insert(out.end(), seq.values().begin(), seq.values().end());
        const auto h = lstm_forward_fp(p, seq);
        out.insert(out.end(), h.values().begin(), h.values().end());
    }
    return out;
}

namespace detail {

/// Every stride-th value so that at most `limit` remain.
inline std::vector<float> strided(std::span<const float> values, std::size_t limit) {
    if (values.size() <= limit) return {values.begin(), values.end()};
    const auto stride = (values.size() + limit - 1) / limit;
    std::vector<float> out;
    for (std::size_t i = 0; i < values.size(); i += stride) out.push_back(values[i]);
    return out;
}

inline int fit_group_alpha(std::span<const float> values, int levels) {
    const auto sample = strided(values, 200000);
    const auto candidates = valid_alpha(suggest_alpha(std::span<const float>(sample)));
    return fit_alpha_mse(std::span<const float>(sample), levels, std::span<const int>(candidates));
}

}  // namespace detail

/// X on `x_levels`, weights and biases on `w_levels`; each alpha is the
/// suggest_alpha candidate with the lowest reconstruction MSE.
inline ScalingConfig fit_scaling_config(const LstmParams& p, std::span<const float> activations, int x_levels,
                                        int w_levels) {
    ScalingConfig cfg;
    cfg[Group::x] = {x_levels, detail::fit_group_alpha(activations, x_levels)};
    cfg[Group::wfwd] = {w_levels, detail::fit_group_alpha(detail::gather_values(p.w_fwd), w_levels)};
    cfg[Group::wrec] = {w_levels, detail::fit_group_alpha(detail::gather_values(p.w_rec), w_levels)};
    cfg[Group::bias] = {w_levels, detail::fit_group_alpha(detail::gather_values(p.bias), w_levels)};
    cfg.validate();
    return cfg;
}

struct ScaleSearch {
    std::size_t max_sweeps = 3;
    FeatureSource features = FeatureSource::mean_hidden;
    std::size_t workers = 1;
};

/// Coordinate descent on accuracy over `tune` (which must not be the
/// evaluation set): each sweep visits X, Wfwd, Wrec, B and moves a group's
/// alpha to the best suggest_alpha candidate, the incumbent winning ties.
/// Level counts stay as in `start`.
inline ScalingConfig search_scaling_config(const LstmParams& p, const ClassifierHead& head, const Dataset& tune,
                                           std::span<const float> activations, ScalingConfig start,
                                           const ScaleSearch& opt = {}) {
    auto suggest = [](const std::vector<float>& v) {
        return detail::valid_alpha(suggest_alpha(std::span<const float>(v)));
    };
    std::array<std::vector<int>, 4> candidates;
    candidates[index(Group::x)] = suggest(detail::strided(activations, 200000));
    candidates[index(Group::wfwd)] = suggest(detail::gather_values(p.w_fwd));
    candidates[index(Group::wrec)] = suggest(detail::gather_values(p.w_rec));
    candidates[index(Group::bias)] = suggest(detail::gather_values(p.bias));

    auto accuracy = [&](const ScalingConfig& cfg) { return evaluate_accuracy(quantize_lstm(p, cfg), head, tune, opt.features); };
    ScalingConfig best = start;
    double best_acc = accuracy(best);
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        bool moved = false;
        for (auto g : all_groups) {
            ExplorationSpec spec;
            for (auto h : all_groups) spec.fix(h, best[h]);
            spec[g].alpha_exps = candidates[index(g)];
            spec.features = opt.features;
            const auto res = explore(p, head, tune, spec, opt.workers);
            const auto& top = res.best();
            if (top.accuracy > best_acc) {
                best = top.config;
                best_acc = top.accuracy;
                moved = true;
            }
        }
        if (!moved) break;
    }
    return best;
}

inline FixedPointLstm fit_fixed_point(const LstmParams& p, std::span<const float> activations, int act_bits,
                                      int weight_bits) {
    float max_abs = 0.0f;
    for (float v : activations) max_abs = std::max(max_abs, std::fabs(v));
    return quantize_lstm_fixed(p, act_bits, weight_bits, max_abs);
}

enum class AlphaChoice { mse, search };

struct CompareOptions {
    AlphaChoice alpha = AlphaChoice::search;
    std::size_t calibration_samples = 64;
    std::size_t tune_samples = 160;
    FeatureSource features = FeatureSource::mean_hidden;
    std::size_t workers = 1;
};

struct SchemeComparison {
    int input_levels = 0;
    int weight_levels = 0;
    double fp = 0.0;
    double fixed_point = 0.0;
    double multi_level = 0.0;
    ScalingConfig config;  // multi-level scales used
};

/// FP, fixed-point (m, n bits) and multi-level (m, n levels) accuracy on
/// `test`. Every scale is chosen from `calib` only.
inline std::vector<SchemeComparison> compare_schemes(const LstmParams& p, const ClassifierHead& head,
                                                     const Dataset& calib, const Dataset& test,
                                                     std::span<const std::pair<int, int>> pairs,
                                                     const CompareOptions& opt = {}) {
    const auto acts = collect_activations(p, calib, opt.calibration_samples);
    std::vector<std::size_t> idx(std::min(opt.tune_samples, calib.samples));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto tune = calib.subset(idx);
    const double fp = evaluate_accuracy(p, head, test, opt.features);
    std::vector<SchemeComparison> out;
    for (auto [m, n] : pairs) {
        auto cfg = fit_scaling_config(p, acts, m, n);
        if (opt.alpha == AlphaChoice::search)
            cfg = search_scaling_config(p, head, tune, acts, cfg, {3, opt.features, opt.workers});
        out.push_back({m, n, fp, evaluate_accuracy(fit_fixed_point(p, acts, m, n), head, test, opt.features),
                       evaluate_accuracy(quantize_lstm(p, cfg), head, test, opt.features), cfg});
    }
    return out;
}

inline std::string comparison_csv(std::span<const SchemeComparison> rows) {
    std::string out = "input_levels,weight_levels,fp,fixed_point,multi_level,alpha_exps\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.4f,%.4f,%.4f,", r.input_levels, r.weight_levels, r.fp, r.fixed_point,
                      r.multi_level);
        out += buf;
        for (auto g : all_groups) out += (g == Group::x ? "" : " ") + std::to_string(r.config[g].alpha_exp);
        out += "\n";
    }
    return out;
}

}  // namespace mlbin
