#pragma once

// Quantized LSTM inference. Weights, biases, x_t and h_{t-1} are
// multi-level binarized per parameter group; matrix products run through
// the multi-level MAC; gate nonlinearities and the cell update stay in
// full precision.

#include <array>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlbin/dataset.hpp"
#include "mlbin/error.hpp"
#include "mlbin/kernels.hpp"
#include "mlbin/lstm.hpp"
#include "mlbin/quantization.hpp"
#include "mlbin/tensor.hpp"

namespace mlbin {

/// Parameter groups sharing one (levels, alpha) choice: the input
/// activations (x_t and h_{t-1}), forward weights, recurrent weights, biases.
enum class Group : std::size_t { x = 0, wfwd = 1, wrec = 2, bias = 3 };

inline constexpr std::array<Group, 4> all_groups{Group::x, Group::wfwd, Group::wrec, Group::bias};

inline constexpr const char* group_name(Group g) noexcept {
    switch (g) {
        case Group::x:
            return "x";
        case Group::wfwd:
            return "wfwd";
        case Group::wrec:
            return "wrec";
        case Group::bias:
            return "bias";
    }
    return "?";
}

inline constexpr std::size_t index(Group g) noexcept { return static_cast<std::size_t>(g); }

struct GroupConfig {
    int levels = 1;
    int alpha_exp = 0;

    static constexpr int min_levels = 1, max_levels = 8;
    static constexpr int min_alpha_exp = -15, max_alpha_exp = 4;

    friend auto operator<=>(const GroupConfig&, const GroupConfig&) = default;
};

struct ScalingConfig {
    std::array<GroupConfig, 4> groups{};

    GroupConfig& operator[](Group g) { return groups[index(g)]; }
    const GroupConfig& operator[](Group g) const { return groups[index(g)]; }

    /// Same levels everywhere; activations on `x_levels`, everything else on `w_levels`.
    static ScalingConfig uniform(int x_levels, int w_levels, std::array<int, 4> alpha_exps) {
        ScalingConfig c;
        for (auto g : all_groups) c[g] = {g == Group::x ? x_levels : w_levels, alpha_exps[index(g)]};
        return c;
    }

    void validate() const {
        for (auto g : all_groups) {
            const auto& gc = (*this)[g];
            if (!(gc.levels >= GroupConfig::min_levels && gc.levels <= GroupConfig::max_levels))
                detail::fail(ErrorKind::config, std::string("group ") + group_name(g) + " levels " +
                                                    std::to_string(gc.levels) + " outside [1,8]");
            if (!(gc.alpha_exp >= GroupConfig::min_alpha_exp && gc.alpha_exp <= GroupConfig::max_alpha_exp))
                detail::fail(ErrorKind::config, std::string("group ") + group_name(g) + " alpha exponent " +
                                                    std::to_string(gc.alpha_exp) + " outside [-15,4]");
        }
    }

    std::string to_string() const {
        std::string s;
        for (auto g : all_groups) {
            if (!s.empty()) s += ' ';
            s += std::string(group_name(g)) + "=(" + std::to_string((*this)[g].levels) + "," +
                 std::to_string((*this)[g].alpha_exp) + ")";
        }
        return s;
    }

    friend auto operator<=>(const ScalingConfig&, const ScalingConfig&) = default;
};

class QuantizedLstmParams {
public:
    QuantizedLstmParams() = default;

    /// Checks shapes and that every tensor carries its group's (levels, alpha).
    QuantizedLstmParams(std::size_t n_input, std::size_t n_hidden, ScalingConfig config,
                        PerGate<MultiLevelTensor> w_fwd, PerGate<MultiLevelTensor> w_rec,
                        PerGate<MultiLevelTensor> bias)
        : n_input_(n_input),
          n_hidden_(n_hidden),
          config_(config),
          w_fwd_(std::move(w_fwd)),
          w_rec_(std::move(w_rec)),
          bias_(std::move(bias)) {
        config_.validate();
        auto check = [&](const MultiLevelTensor& t, const Shape& shape, Group g, const std::string& name) {
            if (t.shape() != shape)
                detail::fail(ErrorKind::structural,
                             name + " has shape " + shape_str(t.shape()) + ", expected " + shape_str(shape));
            if (!(t.levels() == config_[g].levels && t.alpha_exp() == config_[g].alpha_exp))
                detail::fail(ErrorKind::structural, name + " does not carry its group's levels/alpha");
        };
        for (auto gate : all_gates) {
            const auto i = index(gate);
            const std::string suffix = std::string(".") + gate_name(gate);
            check(w_fwd_[i], {n_hidden, n_input}, Group::wfwd, "w_fwd" + suffix);
            check(w_rec_[i], {n_hidden, n_hidden}, Group::wrec, "w_rec" + suffix);
            check(bias_[i], {n_hidden}, Group::bias, "bias" + suffix);
            fwd_rows_[i] = w_fwd_[i].split_rows();
            rec_rows_[i] = w_rec_[i].split_rows();
            bias_values_[i].resize(n_hidden);
            for (std::size_t j = 0; j < n_hidden; ++j) bias_values_[i][j] = bias_[i].value(j);
        }
    }

    std::size_t n_input() const noexcept { return n_input_; }
    std::size_t n_hidden() const noexcept { return n_hidden_; }
    const ScalingConfig& config() const noexcept { return config_; }
    const MultiLevelTensor& w_fwd(Gate g) const { return w_fwd_[index(g)]; }
    const MultiLevelTensor& w_rec(Gate g) const { return w_rec_[index(g)]; }
    const MultiLevelTensor& bias(Gate g) const { return bias_[index(g)]; }
    std::span<const MultiLevelTensor> fwd_rows(Gate g) const { return fwd_rows_[index(g)]; }
    std::span<const MultiLevelTensor> rec_rows(Gate g) const { return rec_rows_[index(g)]; }
    std::span<const double> bias_values(Gate g) const { return bias_values_[index(g)]; }

    /// Full-precision parameters holding the reconstructed values.
    LstmParams dequantized() const {
        LstmParams p;
        p.n_input = n_input_;
        p.n_hidden = n_hidden_;
        for (auto g : all_gates) {
            p.w_fwd[index(g)] = dequantize(w_fwd_[index(g)]);
            p.w_rec[index(g)] = dequantize(w_rec_[index(g)]);
            p.bias[index(g)] = dequantize(bias_[index(g)]);
        }
        return p;
    }

    friend bool operator==(const QuantizedLstmParams& a, const QuantizedLstmParams& b) {
        return a.n_input_ == b.n_input_ && a.n_hidden_ == b.n_hidden_ && a.config_ == b.config_ &&
               a.w_fwd_ == b.w_fwd_ && a.w_rec_ == b.w_rec_ && a.bias_ == b.bias_;
    }

private:
    std::size_t n_input_ = 0;
    std::size_t n_hidden_ = 0;
    ScalingConfig config_;
    PerGate<MultiLevelTensor> w_fwd_, w_rec_, bias_;
    // derived: word-aligned rows and exact bias values
    PerGate<std::vector<MultiLevelTensor>> fwd_rows_, rec_rows_;
    PerGate<std::vector<double>> bias_values_;
};

inline QuantizedLstmParams quantize_lstm(const LstmParams& p, const ScalingConfig& cfg) {
    p.validate();
    cfg.validate();
    PerGate<MultiLevelTensor> wf, wr, b;
    for (auto g : all_gates) {
        const auto i = index(g);
        wf[i] = quantize_tensor(p.w_fwd[i], cfg[Group::wfwd].levels, cfg[Group::wfwd].alpha_exp);
        wr[i] = quantize_tensor(p.w_rec[i], cfg[Group::wrec].levels, cfg[Group::wrec].alpha_exp);
        b[i] = quantize_tensor(p.bias[i], cfg[Group::bias].levels, cfg[Group::bias].alpha_exp);
    }
    return {p.n_input, p.n_hidden, cfg, std::move(wf), std::move(wr), std::move(b)};
}

/// Gate pre-activations shift_scale(W_fwd x^) + shift_scale(W_rec h^) + b^,
/// with x_t and h_{t-1} binarized on the fly under the X group config.
inline PerGate<std::vector<double>> lstm_preactivations_ml(const QuantizedLstmParams& q, const DenseTensor& x_t,
                                                           const LstmState& s, DotPath path = DotPath::bitplane) {
    detail::check_step_shapes(q.n_input(), q.n_hidden(), x_t, s);
    const auto& xc = q.config()[Group::x];
    const auto xq = quantize_tensor(x_t, xc.levels, xc.alpha_exp);
    const auto hq = quantize_tensor(s.h, xc.levels, xc.alpha_exp);
    PerGate<std::vector<double>> pre;
    for (auto g : all_gates) {
        auto& out = pre[index(g)];
        out.resize(q.n_hidden());
        const auto fwd = q.fwd_rows(g);
        const auto rec = q.rec_rows(g);
        const auto b = q.bias_values(g);
        for (std::size_t j = 0; j < q.n_hidden(); ++j)
            out[j] = shift_scale(ml_dot(fwd[j], xq, path)) + shift_scale(ml_dot(rec[j], hq, path)) + b[j];
    }
    return pre;
}

inline LstmState lstm_cell_ml(const QuantizedLstmParams& q, const DenseTensor& x_t, const LstmState& s,
                              DotPath path = DotPath::bitplane) {
    return detail::lstm_combine(lstm_preactivations_ml(q, x_t, s, path), s);
}

inline DenseTensor lstm_forward_ml(const QuantizedLstmParams& q, const DenseTensor& seq, const LstmState& s0,
                                   DotPath path = DotPath::bitplane) {
    return detail::run_sequence(q.n_input(), q.n_hidden(), seq, s0,
                                [&](const DenseTensor& x, const LstmState& s) { return lstm_cell_ml(q, x, s, path); });
}

inline DenseTensor lstm_forward_ml(const QuantizedLstmParams& q, const DenseTensor& seq) {
    return lstm_forward_ml(q, seq, LstmState::zeros(q.n_hidden()));
}

/// Conventional fixed-point baseline. Weights and biases are b_w-bit
/// integers with one power-of-two scale per group; x_t and h_{t-1} are
/// b_a-bit integers on a fixed activation scale.
struct FixedPointConfig {
    int act_bits = 8;
    int weight_bits = 8;
    int act_scale_exp = 0;
};

struct FixedPointLstm {
    LstmParams weights;  // dequantized fixed-point values
    FixedPointConfig config;

    std::size_t n_input() const noexcept { return weights.n_input; }
    std::size_t n_hidden() const noexcept { return weights.n_hidden; }
};

/// `act_max_abs` is the calibrated activation range used for the static
/// activation scale.
inline FixedPointLstm quantize_lstm_fixed(const LstmParams& p, int act_bits, int weight_bits, double act_max_abs) {
    p.validate();
    auto group_max = [](const PerGate<DenseTensor>& ts) {
        float m = 0.0f;
        for (const auto& t : ts) m = std::max(m, t.max_abs());
        return static_cast<double>(m);
    };
    const int kf = fixed_point_scale_exp(group_max(p.w_fwd), weight_bits);
    const int kr = fixed_point_scale_exp(group_max(p.w_rec), weight_bits);
    const int kb = fixed_point_scale_exp(group_max(p.bias), weight_bits);
    auto fx = [&](const DenseTensor& t, int k) {
        return fixed_point_quantize_at(t.values(), t.shape(), weight_bits, k).dequantize();
    };
    FixedPointLstm out;
    out.weights.n_input = p.n_input;
    out.weights.n_hidden = p.n_hidden;
    for (auto g : all_gates) {
        const auto i = index(g);
        out.weights.w_fwd[i] = fx(p.w_fwd[i], kf);
        out.weights.w_rec[i] = fx(p.w_rec[i], kr);
        out.weights.bias[i] = fx(p.bias[i], kb);
    }
    out.config = {act_bits, weight_bits, fixed_point_scale_exp(act_max_abs, act_bits)};
    return out;
}

inline LstmState lstm_cell_fixed(const FixedPointLstm& q, const DenseTensor& x_t, const LstmState& s) {
    const auto& c = q.config;
    auto act = [&](const DenseTensor& t) {
        return fixed_point_quantize_at(t.values(), t.shape(), c.act_bits, c.act_scale_exp).dequantize();
    };
    const LstmState sq{act(s.h), s.c};
    return detail::lstm_combine(lstm_preactivations_fp(q.weights, act(x_t), sq), s);
}

inline DenseTensor lstm_forward_fixed(const FixedPointLstm& q, const DenseTensor& seq) {
    return detail::run_sequence(q.n_input(), q.n_hidden(), seq, LstmState::zeros(q.n_hidden()),
                                [&](const DenseTensor& x, const LstmState& s) { return lstm_cell_fixed(q, x, s); });
}

// Uniform entry point so evaluation code is written once for every scheme.
inline DenseTensor forward(const LstmParams& p, const DenseTensor& seq) { return lstm_forward_fp(p, seq); }
inline DenseTensor forward(const QuantizedLstmParams& q, const DenseTensor& seq) { return lstm_forward_ml(q, seq); }
inline DenseTensor forward(const FixedPointLstm& q, const DenseTensor& seq) { return lstm_forward_fixed(q, seq); }

template <typename M>
concept SequenceModel = requires(const M& m, const DenseTensor& seq) {
    { forward(m, seq) } -> std::same_as<DenseTensor>;
};

enum class FeatureSource { mean_hidden, final_hidden };

/// Time-mean of h_t, or h_T, from a T x N_h output.
inline std::vector<float> hidden_features(const DenseTensor& outputs, FeatureSource src) {
    const auto steps = outputs.dim(0), n = outputs.dim(1);
    if (src == FeatureSource::final_hidden) {
        const auto last = outputs.row(steps - 1);
        return {last.begin(), last.end()};
    }
    std::vector<double> acc(n, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto row = outputs.row(t);
        for (std::size_t j = 0; j < n; ++j) acc[j] += row[j];
    }
    std::vector<float> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(acc[j] / static_cast<double>(steps));
    return out;
}

template <SequenceModel M>
std::vector<float> sequence_features(const M& model, const DenseTensor& seq, FeatureSource src) {
    return hidden_features(forward(model, seq), src);
}

/// Predicted class per sample.
template <SequenceModel M>
std::vector<std::size_t> predict(const M& model, const ClassifierHead& head, const Dataset& data,
                                 FeatureSource src = FeatureSource::mean_hidden) {
    std::vector<std::size_t> out(data.samples);
    for (std::size_t s = 0; s < data.samples; ++s)
        out[s] = classify(head, sequence_features(model, data.sequence(s), src));
    return out;
}

/// Fraction of samples whose argmax class matches the label.
template <SequenceModel M>
double evaluate_accuracy(const M& model, const ClassifierHead& head, const Dataset& data,
                         FeatureSource src = FeatureSource::mean_hidden) {
    detail::require(data.samples > 0, ErrorKind::validation, "accuracy of an empty dataset");
    detail::require(data.labelled(), ErrorKind::validation, "accuracy needs a labelled dataset");
    detail::require(head.n_classes() >= data.n_classes, ErrorKind::validation,
                    "head has fewer classes than the dataset");
    const auto pred = predict(model, head, data, src);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.samples; ++s) correct += pred[s] == data.labels[s];
    return static_cast<double>(correct) / static_cast<double>(data.samples);
}

}  // namespace mlbin
