#pragma once

// Exhaustive search over per-group (levels, alpha) candidates.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mlbin/binarized_lstm.hpp"
#include "mlbin/dataset.hpp"
#include "mlbin/error.hpp"
#include "mlbin/parallel.hpp"
#include "mlbin/quantization.hpp"

namespace mlbin {

struct GroupCandidates {
    std::vector<int> levels;
    std::vector<int> alpha_exps;  // empty: filled from suggest_alpha by resolve_candidates
};

enum class TieBreak { earliest, latest };

struct ExplorationSpec {
    std::array<GroupCandidates, 4> groups;
    TieBreak tie_break = TieBreak::earliest;
    FeatureSource features = FeatureSource::mean_hidden;

    GroupCandidates& operator[](Group g) { return groups[index(g)]; }
    const GroupCandidates& operator[](Group g) const { return groups[index(g)]; }

    /// Pins a group to a single (levels, alpha).
    void fix(Group g, GroupConfig c) { (*this)[g] = {{c.levels}, {c.alpha_exp}}; }
};

namespace detail {

inline std::vector<int> valid_alpha(std::vector<int> ks) {
    std::erase_if(ks, [](int k) { return k < GroupConfig::min_alpha_exp || k > GroupConfig::max_alpha_exp; });
    if (ks.empty()) ks.push_back(0);
    return ks;
}

template <typename Range>
std::vector<float> gather_values(const Range& tensors) {
    std::vector<float> v;
    for (const auto& t : tensors) v.insert(v.end(), t.values().begin(), t.values().end());
    return v;
}

}  // namespace detail

/// Fills empty alpha candidate lists from the value domain of each group:
/// X from the dataset inputs, the weight and bias groups from the model.
inline ExplorationSpec resolve_candidates(ExplorationSpec spec, const LstmParams& p, const Dataset& data) {
    for (auto g : all_groups) {
        auto& gc = spec[g];
        if (!gc.alpha_exps.empty()) continue;
        std::vector<float> values;
        switch (g) {
            case Group::x:
                values = data.data;
                break;
            case Group::wfwd:
                values = detail::gather_values(p.w_fwd);
                break;
            case Group::wrec:
                values = detail::gather_values(p.w_rec);
                break;
            case Group::bias:
                values = detail::gather_values(p.bias);
                break;
        }
        gc.alpha_exps = detail::valid_alpha(suggest_alpha(std::span<const float>(values)));
    }
    return spec;
}

/// Cartesian product in lexicographic order: X outermost, then Wfwd, Wrec,
/// B; inside a group by (levels, alpha_exp) ascending.
inline std::vector<ScalingConfig> enumerate_configs(const ExplorationSpec& spec) {
    std::array<std::vector<GroupConfig>, 4> axes;
    for (auto g : all_groups) {
        const auto& gc = spec[g];
        if (gc.levels.empty() || gc.alpha_exps.empty())
            detail::fail(ErrorKind::validation, std::string("group ") + group_name(g) + " has no candidates");
        std::set<GroupConfig> unique;
        for (int n : gc.levels)
            for (int k : gc.alpha_exps) unique.insert({n, k});
        axes[index(g)].assign(unique.begin(), unique.end());
    }
    std::vector<ScalingConfig> out;
    out.reserve(axes[0].size() * axes[1].size() * axes[2].size() * axes[3].size());
    for (const auto& x : axes[0])
        for (const auto& wf : axes[1])
            for (const auto& wr : axes[2])
                for (const auto& b : axes[3]) {
                    ScalingConfig c;
                    c[Group::x] = x;
                    c[Group::wfwd] = wf;
                    c[Group::wrec] = wr;
                    c[Group::bias] = b;
                    c.validate();
                    out.push_back(c);
                }
    return out;
}

struct EvaluatedConfig {
    ScalingConfig config;
    double accuracy = 0.0;

    friend bool operator==(const EvaluatedConfig&, const EvaluatedConfig&) = default;
};

struct ExplorationResult {
    std::vector<EvaluatedConfig> evaluated;  // enumeration order
    std::size_t best_index = 0;
    double wall_seconds = 0.0;

    const EvaluatedConfig& best() const { return evaluated.at(best_index); }
    std::size_t total() const noexcept { return evaluated.size(); }
};

/// Index of the best accuracy under the tie-break rule.
inline std::size_t select_best(std::span<const EvaluatedConfig> evaluated, TieBreak tie) {
    detail::require(!evaluated.empty(), ErrorKind::validation, "no evaluated configurations");
    std::size_t best = 0;
    for (std::size_t i = 1; i < evaluated.size(); ++i) {
        const double a = evaluated[i].accuracy, b = evaluated[best].accuracy;
        if (a > b || (tie == TieBreak::latest && a == b)) best = i;
    }
    return best;
}

/// Quantizes and evaluates every configuration of the grid. Evaluations run
/// on `workers` threads; results land in enumeration order.
inline ExplorationResult explore(const LstmParams& p, const ClassifierHead& head, const Dataset& data,
                                 const ExplorationSpec& spec, std::size_t workers = 1) {
    detail::require(data.samples > 0, ErrorKind::validation, "exploration needs a non-empty dataset");
    const auto start = std::chrono::steady_clock::now();
    const auto configs = enumerate_configs(spec);
    ExplorationResult res;
    res.evaluated.resize(configs.size());
    parallel_for(configs.size(), workers, [&](std::size_t i) {
        try {
            const auto q = quantize_lstm(p, configs[i]);
            res.evaluated[i] = {configs[i], evaluate_accuracy(q, head, data, spec.features)};
        } catch (const Error& e) {
            throw Error(e.kind(), "while evaluating " + configs[i].to_string() + ": " + e.what());
        }
    });
    res.best_index = select_best(res.evaluated, spec.tie_break);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

/// Picks the configurations whose group matches: alpha always, levels when given.
struct GroupSelector {
    int alpha_exp = 0;
    std::optional<int> levels;

    bool matches(const GroupConfig& c) const { return c.alpha_exp == alpha_exp && (!levels || *levels == c.levels); }
};

/// Accuracy indexed by (Wfwd alpha_exp, Wrec alpha_exp) for fixed X and B.
/// A cell is absent when no evaluated config maps to it; when several do
/// (differing levels) the highest accuracy is kept.
struct SliceTable {
    std::vector<int> row_alpha_exps;  // Wfwd
    std::vector<int> col_alpha_exps;  // Wrec
    std::vector<std::optional<double>> cells;

    const std::optional<double>& at(std::size_t r, std::size_t c) const { return cells[r * col_alpha_exps.size() + c]; }
};

inline SliceTable grid_slice(const ExplorationResult& result, const GroupSelector& x, const GroupSelector& bias) {
    std::set<int> rows, cols;
    for (const auto& e : result.evaluated) {
        rows.insert(e.config[Group::wfwd].alpha_exp);
        cols.insert(e.config[Group::wrec].alpha_exp);
    }
    SliceTable t{{rows.begin(), rows.end()}, {cols.begin(), cols.end()}, {}};
    t.cells.assign(t.row_alpha_exps.size() * t.col_alpha_exps.size(), std::nullopt);
    std::size_t matched = 0;
    for (const auto& e : result.evaluated) {
        if (!x.matches(e.config[Group::x]) || !bias.matches(e.config[Group::bias])) continue;
        ++matched;
        const auto r = static_cast<std::size_t>(std::ranges::find(t.row_alpha_exps, e.config[Group::wfwd].alpha_exp) -
                                                t.row_alpha_exps.begin());
        const auto c = static_cast<std::size_t>(std::ranges::find(t.col_alpha_exps, e.config[Group::wrec].alpha_exp) -
                                                t.col_alpha_exps.begin());
        auto& cell = t.cells[r * t.col_alpha_exps.size() + c];
        if (!cell || e.accuracy > *cell) cell = e.accuracy;
    }
    detail::require(matched > 0, ErrorKind::validation, "no evaluated configuration matches the requested X/B slice");
    return t;
}

namespace detail {

inline std::string format_accuracy(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", a);
    return buf;
}

}  // namespace detail

/// Header row and column carry alpha exponents; absent cells print "NA".
inline std::string slice_csv(const SliceTable& t) {
    std::string out = "wfwd\\wrec";
    for (int k : t.col_alpha_exps) out += "," + std::to_string(k);
    out += "\n";
    for (std::size_t r = 0; r < t.row_alpha_exps.size(); ++r) {
        out += std::to_string(t.row_alpha_exps[r]);
        for (std::size_t c = 0; c < t.col_alpha_exps.size(); ++c) {
            const auto& cell = t.at(r, c);
            out += "," + (cell ? detail::format_accuracy(*cell) : std::string("NA"));
        }
        out += "\n";
    }
    return out;
}

inline std::string exploration_csv(const ExplorationResult& r) {
    std::string out =
        "x_levels,x_alpha_exp,wfwd_levels,wfwd_alpha_exp,wrec_levels,wrec_alpha_exp,bias_levels,bias_alpha_exp,"
        "accuracy\n";
    for (const auto& e : r.evaluated) {
        for (auto g : all_groups)
            out += std::to_string(e.config[g].levels) + "," + std::to_string(e.config[g].alpha_exp) + ",";
        out += detail::format_accuracy(e.accuracy) + "\n";
    }
    return out;
}

}  // namespace mlbin
