#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mlbin/lstm.hpp"
#include "test_util.hpp"

using namespace mlbin;
using mlbin::test::expect_error;

namespace {

LstmParams with_biases(std::size_t n_x, std::size_t n_h, float bc, float bf, float bi, float bo) {
    auto p = LstmParams::zeros(n_x, n_h);
    p.bias[index(Gate::cell)] = DenseTensor::vector(std::vector<float>(n_h, bc));
    p.bias[index(Gate::forget)] = DenseTensor::vector(std::vector<float>(n_h, bf));
    p.bias[index(Gate::input)] = DenseTensor::vector(std::vector<float>(n_h, bi));
    p.bias[index(Gate::output)] = DenseTensor::vector(std::vector<float>(n_h, bo));
    return p;
}

// Scalar transcription of the cell equations on plain arrays.
struct ScalarCell {
    std::size_t nx, nh;
    std::vector<double> w[4], u[4], b[4];  // c, f, i, o

    explicit ScalarCell(const LstmParams& p) : nx(p.n_input), nh(p.n_hidden) {
        for (int g = 0; g < 4; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            w[g].assign(p.w_fwd[gi].values().begin(), p.w_fwd[gi].values().end());
            u[g].assign(p.w_rec[gi].values().begin(), p.w_rec[gi].values().end());
            b[g].assign(p.bias[gi].values().begin(), p.bias[gi].values().end());
        }
    }

    void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
        std::vector<double> pre[4];
        for (int g = 0; g < 4; ++g) {
            pre[g].resize(nh);
            for (std::size_t j = 0; j < nh; ++j) {
                double a = 0.0;
                for (std::size_t k = 0; k < nx; ++k) a += w[g][j * nx + k] * x[k];
                for (std::size_t k = 0; k < nh; ++k) a += u[g][j * nh + k] * h[k];
                pre[g][j] = a + b[g][j];
            }
        }
        for (std::size_t j = 0; j < nh; ++j) {
            const double m = std::tanh(pre[0][j]);
            const double f = 1.0 / (1.0 + std::exp(-pre[1][j]));
            const double i = 1.0 / (1.0 + std::exp(-pre[2][j]));
            const double o = 1.0 / (1.0 + std::exp(-pre[3][j]));
            c[j] = f * c[j] + i * m;
            h[j] = o * std::tanh(c[j]);
        }
    }
};

::testing::AssertionResult within_one_ulp(float actual, double expected) {
    const float e = static_cast<float>(expected);
    if (actual == e || std::nextafter(actual, e) == e) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << actual << " vs " << expected;
}

}  // namespace

TEST(Sigmoid, Examples) {
    EXPECT_EQ(logistic_sigmoid(0.0), 0.5);
    EXPECT_NEAR(logistic_sigmoid(1.0), 0.7310585786300049, 1e-15);
    EXPECT_NEAR(logistic_sigmoid(50.0), 1.0, 1e-15);
    EXPECT_NEAR(logistic_sigmoid(-50.0), 0.0, 1e-15);
}

TEST(LstmCell, ZeroParamsGiveZeroState) {
    const auto p = LstmParams::zeros(3, 2);
    const auto s = lstm_cell_fp(p, DenseTensor::vector({1.0f, -2.0f, 0.5f}), LstmState::zeros(2));
    EXPECT_EQ(s, LstmState::zeros(2));
}

TEST(LstmCell, SaturatedForgetGatePassesState) {
    const auto p = with_biases(2, 3, 0.0f, 20.0f, -20.0f, 0.0f);
    const LstmState s0{DenseTensor::zeros({3}), DenseTensor::vector({0.7f, -0.3f, 1.5f})};
    const auto s1 = lstm_cell_fp(p, DenseTensor::vector({1.0f, 1.0f}), s0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(s1.c[j], s0.c[j], 1e-6);
}

TEST(LstmCell, HandExecutedSingleUnit) {
    const auto p = LstmParams::zeros(1, 1);
    const LstmState s0{DenseTensor::zeros({1}), DenseTensor::vector({1.0f})};
    const auto s1 = lstm_cell_fp(p, DenseTensor::vector({0.3f}), s0);
    EXPECT_EQ(s1.c[0], 0.5f);
    EXPECT_EQ(s1.h[0], static_cast<float>(0.5 * std::tanh(0.5)));
    EXPECT_NEAR(s1.h[0], 0.23105857863, 1e-7);
}

TEST(LstmCell, InputStateUnmodified) {
    const auto p = random_lstm(3, 4, 1, 0.5);
    const LstmState s0{DenseTensor::vector({0.1f, 0.2f, 0.3f, 0.4f}), DenseTensor::vector({1, 2, 3, 4})};
    const auto copy = s0;
    lstm_cell_fp(p, DenseTensor::vector({1, 2, 3}), s0);
    EXPECT_EQ(s0, copy);
}

TEST(LstmCell, ShapeErrors) {
    const auto p = LstmParams::zeros(3, 2);
    expect_error(ErrorKind::dimension, [&] { lstm_cell_fp(p, DenseTensor::zeros({4}), LstmState::zeros(2)); });
    expect_error(ErrorKind::dimension, [&] { lstm_cell_fp(p, DenseTensor::zeros({3}), LstmState::zeros(3)); });
    expect_error(ErrorKind::dimension, [&] { lstm_forward_fp(p, DenseTensor::zeros({5, 2})); });
    auto bad = p;
    bad.w_rec[1] = DenseTensor::zeros({2, 3});
    expect_error(ErrorKind::dimension, [&] { bad.validate(); });
}

TEST(LstmCell, MatchesScalarOracle) {
    std::mt19937_64 rng(100);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto nx = dim(rng), nh = dim(rng);
        const auto p = random_lstm(nx, nh, rng(), 1.5);
        const auto x = test::uniform_values(rng, nx, -2, 2);
        const auto h0 = test::uniform_values(rng, nh, -1, 1);
        const auto c0 = test::uniform_values(rng, nh, -2, 2);
        const auto s = lstm_cell_fp(p, DenseTensor::vector(x), {DenseTensor::vector(h0), DenseTensor::vector(c0)});
        std::vector<double> xd(x.begin(), x.end()), h(h0.begin(), h0.end()), c(c0.begin(), c0.end());
        ScalarCell(p).step(xd, h, c);
        for (std::size_t j = 0; j < nh; ++j) {
            ASSERT_TRUE(within_one_ulp(s.h[j], h[j])) << "trial " << trial;
            ASSERT_TRUE(within_one_ulp(s.c[j], c[j])) << "trial " << trial;
        }
    }
}

TEST(LstmCell, GatesAndOutputBounded) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_lstm(4, 6, rng(), 3.0);
        const auto x = DenseTensor::vector(test::uniform_values(rng, 4, -10, 10));
        const LstmState s{DenseTensor::vector(test::uniform_values(rng, 6, -1, 1)),
                          DenseTensor::vector(test::uniform_values(rng, 6, -5, 5))};
        const auto pre = lstm_preactivations_fp(p, x, s);
        for (std::size_t j = 0; j < 6; ++j) {
            for (auto g : {Gate::forget, Gate::input, Gate::output}) {
                const double v = logistic_sigmoid(pre[index(g)][j]);
                // open interval mathematically; binary64 saturates for |pre| > ~37
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
            EXPECT_LE(std::fabs(std::tanh(pre[index(Gate::cell)][j])), 1.0);
        }
        const auto next = lstm_cell_fp(p, x, s);
        for (std::size_t j = 0; j < 6; ++j) EXPECT_LE(std::fabs(next.h[j]), 1.0f);
    }
}

TEST(LstmCell, SaturatedStateHoldsOverHundredSteps) {
    const auto p = with_biases(2, 3, 0.0f, 20.0f, -20.0f, 0.0f);
    LstmState s{DenseTensor::zeros({3}), DenseTensor::vector({0.5f, -0.25f, 0.9f})};
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const auto next = lstm_cell_fp(p, DenseTensor::vector(test::uniform_values(rng, 2, -1, 1)), s);
        for (std::size_t j = 0; j < 3; ++j) ASSERT_NEAR(next.c[j], s.c[j], 1e-6) << "t=" << t;
        s = next;
    }
}

TEST(LstmForward, SingleStepEqualsCell) {
    const auto p = random_lstm(3, 5, 4, 0.7);
    const std::vector<float> x{0.2f, -1.0f, 0.4f};
    const auto out = lstm_forward_fp(p, DenseTensor::matrix(1, 3, x));
    const auto s = lstm_cell_fp(p, DenseTensor::vector(x), LstmState::zeros(5));
    ASSERT_EQ(out.shape(), (Shape{1, 5}));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(out(0, j), s.h[j]);
}

TEST(LstmForward, ZeroParamsZeroOutputs) {
    std::mt19937_64 rng(2);
    const auto out = lstm_forward_fp(LstmParams::zeros(3, 4), DenseTensor::matrix(10, 3, test::uniform_values(rng, 30, -5, 5)));
    for (float v : out.values()) EXPECT_EQ(v, 0.0f);
}

TEST(LstmForward, DeterministicAndMatchesStepping) {
    std::mt19937_64 rng(3);
    const auto p = random_lstm(4, 6, 77, 0.5);
    const auto seq = DenseTensor::matrix(20, 4, test::uniform_values(rng, 80, -1, 1));
    const auto a = lstm_forward_fp(p, seq), b = lstm_forward_fp(p, seq);
    EXPECT_EQ(a, b);
    auto s = LstmState::zeros(6);
    for (std::size_t t = 0; t < 20; ++t) {
        const auto row = seq.row(t);
        s = lstm_cell_fp(p, DenseTensor::vector({row.begin(), row.end()}), s);
        for (std::size_t j = 0; j < 6; ++j) ASSERT_EQ(a(t, j), s.h[j]);
    }
}

TEST(Classify, Examples) {
    const ClassifierHead identity{DenseTensor::matrix(2, 2, {1, 0, 0, 1}), DenseTensor::vector({0, 0})};
    EXPECT_EQ(classify(identity, DenseTensor::vector({0.1f, 0.9f})), 1u);
    const ClassifierHead zero{DenseTensor::zeros({2, 2}), DenseTensor::zeros({2})};
    EXPECT_EQ(classify(zero, DenseTensor::vector({0.3f, 0.7f})), 0u);
    const ClassifierHead h{DenseTensor::matrix(2, 2, {1, 0, 0, 2}), DenseTensor::vector({0.5f, 0})};
    const std::vector<float> v{1.0f, 0.3f};
    const auto logits = head_logits(h, v);
    EXPECT_NEAR(logits[0], 1.5, 1e-7);
    EXPECT_NEAR(logits[1], 0.6, 1e-7);
    EXPECT_EQ(classify(h, v), 0u);
    expect_error(ErrorKind::dimension, [&] { classify(h, DenseTensor::vector({1, 2, 3})); });
}
