#pragma once

// Full-precision LSTM cell and sequence pass; the numeric oracle for the
// quantized paths.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mlbin/error.hpp"
#include "mlbin/tensor.hpp"

namespace mlbin {

enum class Gate : std::size_t { cell = 0, forget = 1, input = 2, output = 3 };

inline constexpr std::array<Gate, 4> all_gates{Gate::cell, Gate::forget, Gate::input, Gate::output};

inline constexpr const char* gate_name(Gate g) noexcept {
    switch (g) {
        case Gate::cell:
            return "c";
        case Gate::forget:
            return "f";
        case Gate::input:
            return "i";
        case Gate::output:
            return "o";
    }
    return "?";
}

inline constexpr std::size_t index(Gate g) noexcept { return static_cast<std::size_t>(g); }

template <typename T>
using PerGate = std::array<T, 4>;

/// Weights of one LSTM layer. Gate `cell` produces the candidate m_t; the
/// other three are sigmoid gates. Forward weights are N_h x N_x, recurrent
/// weights N_h x N_h, biases N_h.
struct LstmParams {
    std::size_t n_input = 0;
    std::size_t n_hidden = 0;
    PerGate<DenseTensor> w_fwd;
    PerGate<DenseTensor> w_rec;
    PerGate<DenseTensor> bias;

    void validate() const {
        detail::require(n_input > 0 && n_hidden > 0, ErrorKind::dimension, "LSTM dimensions must be positive");
        for (auto g : all_gates) {
            const auto i = index(g);
            if (w_fwd[i].shape() != Shape{n_hidden, n_input})
                detail::fail(ErrorKind::dimension, std::string("forward weight of gate ") + gate_name(g) +
                                                       " has shape " + shape_str(w_fwd[i].shape()));
            if (w_rec[i].shape() != Shape{n_hidden, n_hidden})
                detail::fail(ErrorKind::dimension, std::string("recurrent weight of gate ") + gate_name(g) +
                                                       " has shape " + shape_str(w_rec[i].shape()));
            if (bias[i].shape() != Shape{n_hidden})
                detail::fail(ErrorKind::dimension,
                             std::string("bias of gate ") + gate_name(g) + " has shape " + shape_str(bias[i].shape()));
        }
    }

    static LstmParams zeros(std::size_t n_input, std::size_t n_hidden) {
        LstmParams p;
        p.n_input = n_input;
        p.n_hidden = n_hidden;
        for (auto g : all_gates) {
            p.w_fwd[index(g)] = DenseTensor::zeros({n_hidden, n_input});
            p.w_rec[index(g)] = DenseTensor::zeros({n_hidden, n_hidden});
            p.bias[index(g)] = DenseTensor::zeros({n_hidden});
        }
        return p;
    }

    friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

/// Every weight and bias drawn from uniform(-range, range).
inline LstmParams random_lstm(std::size_t n_input, std::size_t n_hidden, std::uint64_t seed, double range) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-range, range);
    auto draw = [&](Shape shape) {
        std::vector<float> v(shape_size(shape));
        for (auto& x : v) x = static_cast<float>(dist(rng));
        return DenseTensor(std::move(shape), std::move(v));
    };
    LstmParams p;
    p.n_input = n_input;
    p.n_hidden = n_hidden;
    for (auto g : all_gates) {
        p.w_fwd[index(g)] = draw({n_hidden, n_input});
        p.w_rec[index(g)] = draw({n_hidden, n_hidden});
        p.bias[index(g)] = draw({n_hidden});
    }
    return p;
}

struct LstmState {
    DenseTensor h;
    DenseTensor c;

    static LstmState zeros(std::size_t n_hidden) {
        return {DenseTensor::zeros({n_hidden}), DenseTensor::zeros({n_hidden})};
    }

    friend bool operator==(const LstmState&, const LstmState&) = default;
};

struct ClassifierHead {
    DenseTensor weights;  // n_classes x N_h
    DenseTensor bias;     // n_classes

    std::size_t n_classes() const { return bias.size(); }

    void validate(std::size_t n_hidden) const {
        if (!(weights.rank() == 2 && bias.rank() == 1 && weights.dim(0) == bias.dim(0) && weights.dim(1) == n_hidden &&
              bias.dim(0) > 0))
            detail::fail(ErrorKind::dimension, "classifier head " + shape_str(weights.shape()) + " + " +
                                                   shape_str(bias.shape()) + " does not fit hidden size " +
                                                   std::to_string(n_hidden));
    }

    friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

inline double logistic_sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

inline void check_step_shapes(std::size_t n_input, std::size_t n_hidden, const DenseTensor& x_t, const LstmState& s) {
    if (x_t.shape() != Shape{n_input})
        fail(ErrorKind::dimension,
             "input " + shape_str(x_t.shape()) + " does not match N_x=" + std::to_string(n_input));
    if (!(s.h.shape() == Shape{n_hidden} && s.c.shape() == Shape{n_hidden}))
        fail(ErrorKind::dimension, "state does not match N_h=" + std::to_string(n_hidden));
}

/// Combines gate pre-activations into the next state (cell update and output).
inline LstmState lstm_combine(const PerGate<std::vector<double>>& pre, const LstmState& s) {
    const auto n = s.c.size();
    std::vector<float> h(n), c(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double m = std::tanh(pre[index(Gate::cell)][j]);
        const double f = logistic_sigmoid(pre[index(Gate::forget)][j]);
        const double i = logistic_sigmoid(pre[index(Gate::input)][j]);
        const double o = logistic_sigmoid(pre[index(Gate::output)][j]);
        const double c_new = f * static_cast<double>(s.c[j]) + i * m;
        c[j] = static_cast<float>(c_new);
        h[j] = static_cast<float>(o * std::tanh(c_new));
    }
    return {DenseTensor::vector(std::move(h)), DenseTensor::vector(std::move(c))};
}

}  // namespace detail

/// Gate pre-activations W_fwd x + W_rec h + b, summed in that order in binary64.
inline PerGate<std::vector<double>> lstm_preactivations_fp(const LstmParams& p, const DenseTensor& x_t,
                                                           const LstmState& s) {
    detail::check_step_shapes(p.n_input, p.n_hidden, x_t, s);
    PerGate<std::vector<double>> pre;
    for (auto g : all_gates) {
        const auto gi = index(g);
        auto& out = pre[gi];
        out.resize(p.n_hidden);
        for (std::size_t j = 0; j < p.n_hidden; ++j) {
            double acc = 0.0;
            const auto wf = p.w_fwd[gi].row(j);
            for (std::size_t k = 0; k < p.n_input; ++k) acc += static_cast<double>(wf[k]) * x_t[k];
            const auto wr = p.w_rec[gi].row(j);
            for (std::size_t k = 0; k < p.n_hidden; ++k) acc += static_cast<double>(wr[k]) * s.h[k];
            acc += p.bias[gi][j];
            out[j] = acc;
        }
    }
    return pre;
}

inline LstmState lstm_cell_fp(const LstmParams& p, const DenseTensor& x_t, const LstmState& s) {
    return detail::lstm_combine(lstm_preactivations_fp(p, x_t, s), s);
}

namespace detail {

inline DenseTensor sequence_step(const DenseTensor& seq, std::size_t t) {
    const auto row = seq.row(t);
    return DenseTensor::vector(std::vector<float>(row.begin(), row.end()));
}

/// Runs `step` over the rows of `seq` and stacks every h_t.
template <typename Step>
DenseTensor run_sequence(std::size_t n_input, std::size_t n_hidden, const DenseTensor& seq, LstmState s, Step&& step) {
    if (!(seq.rank() == 2 && seq.dim(0) >= 1 && seq.dim(1) == n_input))
        fail(ErrorKind::dimension,
             "sequence " + shape_str(seq.shape()) + " does not match N_x=" + std::to_string(n_input));
    const auto steps = seq.dim(0);
    std::vector<float> out;
    out.reserve(steps * n_hidden);
    for (std::size_t t = 0; t < steps; ++t) {
        s = step(sequence_step(seq, t), s);
        const auto h = s.h.values();
        out.insert(out.end(), h.begin(), h.end());
    }
    return DenseTensor::matrix(steps, n_hidden, std::move(out));
}

}  // namespace detail

/// All hidden outputs h_1..h_T as a T x N_h tensor.
inline DenseTensor lstm_forward_fp(const LstmParams& p, const DenseTensor& seq, const LstmState& s0) {
    return detail::run_sequence(p.n_input, p.n_hidden, seq, s0,
                                [&](const DenseTensor& x, const LstmState& s) { return lstm_cell_fp(p, x, s); });
}

inline DenseTensor lstm_forward_fp(const LstmParams& p, const DenseTensor& seq) {
    return lstm_forward_fp(p, seq, LstmState::zeros(p.n_hidden));
}

/// Logits W h + b.
inline std::vector<double> head_logits(const ClassifierHead& head, std::span<const float> h) {
    head.validate(h.size());
    std::vector<double> logits(head.n_classes());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        double acc = 0.0;
        const auto w = head.weights.row(c);
        for (std::size_t k = 0; k < h.size(); ++k) acc += static_cast<double>(w[k]) * h[k];
        logits[c] = acc + head.bias[c];
    }
    return logits;
}

/// Argmax of the logits; ties go to the lowest class index.
inline std::size_t classify(const ClassifierHead& head, std::span<const float> h) {
    const auto logits = head_logits(head, h);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[best]) best = c;
    return best;
}

inline std::size_t classify(const ClassifierHead& head, const DenseTensor& h) { return classify(head, h.values()); }

}  // namespace mlbin
