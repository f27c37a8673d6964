#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "mlbin/quantization.hpp"
#include "test_util.hpp"

using namespace mlbin;
using mlbin::test::expect_error;

namespace {

std::vector<int> pattern(std::uint32_t bits, int n) {
    std::vector<int> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = (bits >> i) & 1u ? 1 : -1;
    return s;
}

}  // namespace

TEST(SignBinarize, Examples) {
    EXPECT_EQ(sign_binarize(0.0), 1);
    EXPECT_EQ(sign_binarize(-0.001), -1);
    EXPECT_EQ(sign_binarize(3.7), 1);
}

TEST(HardSigmoid, Examples) {
    EXPECT_EQ(hard_sigmoid(0.0), 0.5);
    EXPECT_EQ(hard_sigmoid(1.0), 1.0);
    EXPECT_EQ(hard_sigmoid(-1.0), 0.0);
    EXPECT_EQ(hard_sigmoid(0.5), 0.75);
    EXPECT_EQ(hard_sigmoid(7.0), 1.0);
}

TEST(StochasticBinarize, DeterministicGivenU) {
    EXPECT_EQ(stochastic_binarize(0.0, 0.3), 1);
    EXPECT_EQ(stochastic_binarize(0.0, 0.7), -1);
    EXPECT_EQ(stochastic_binarize(5.0, 0.999), 1);
    EXPECT_EQ(stochastic_binarize(-5.0, 0.0), -1);
    expect_error(ErrorKind::validation, [] { stochastic_binarize(0.0, 1.0); });
    expect_error(ErrorKind::validation, [] { stochastic_binarize(0.0, -0.1); });
}

TEST(StochasticBinarize, MonteCarloMatchesHardSigmoid) {
    // 1e5 draws: binomial std-dev of the frequency is at most 0.0016
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double x : {-0.6, 0.0, 0.3}) {
        int plus = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) plus += stochastic_binarize(x, u(rng)) == 1;
        EXPECT_NEAR(plus / double(n), hard_sigmoid(x), 0.01) << x;
    }
}

TEST(StochasticBinarize, SameStreamSameBits) {
    auto draw = [] {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<int> out;
        for (int i = 0; i < 1000; ++i) out.push_back(stochastic_binarize(std::sin(i * 0.1), u(rng)));
        return out;
    };
    EXPECT_EQ(draw(), draw());
}

TEST(MultiLevelBinarize, TraceOfPointSeven) {
    // alpha = 1/2: r = 0.7 -> +1, 0.2 -> +1, 0.2 - 0.25 = -0.05
    const auto d = multi_level_binarize(0.7, 2, -1);
    EXPECT_EQ(d.signs, (std::vector<int>{1, 1}));
    EXPECT_NEAR(d.residual, -0.05, 1e-15);
}

TEST(MultiLevelBinarize, ZeroAtOneLevel) {
    const auto d = multi_level_binarize(0.0, 1, -1);
    EXPECT_EQ(d.signs, (std::vector<int>{1}));
    EXPECT_EQ(d.residual, -0.5);
}

TEST(MultiLevelBinarize, TraceOfMinusPointSix) {
    // alpha = 1/2: -0.6 -> -1 (r=-0.1), -1 (r=0.15), +1 (r=0.025)
    const auto d = multi_level_binarize(-0.6, 3, -1);
    EXPECT_EQ(d.signs, (std::vector<int>{-1, -1, 1}));
    EXPECT_NEAR(d.residual, 0.025, 1e-15);
}

TEST(MultiLevelBinarize, RejectsBadInput) {
    expect_error(ErrorKind::validation, [] { multi_level_binarize(0.1, 0, 0); });
    expect_error(ErrorKind::validation, [] { multi_level_binarize(NAN, 2, 0); });
}

TEST(Reconstruct, Examples) {
    EXPECT_EQ(reconstruct(std::vector<int>{1, 1}, -1), 0.75);
    EXPECT_EQ(reconstruct(std::vector<int>{-1, -1, 1}, -1), -0.625);
    EXPECT_EQ(reconstruct(std::vector<int>{-1}, 2), -4.0);
}

TEST(OddInteger, Examples) {
    EXPECT_EQ(to_odd_integer(std::vector<int>{1, 1}), 3);
    EXPECT_EQ(to_odd_integer(std::vector<int>{1, -1}), 1);
    EXPECT_EQ(to_odd_integer(std::vector<int>{-1, -1, 1}), -5);
    EXPECT_EQ(to_odd_integer(std::vector<int>{-1}), -1);
}

TEST(MultiLevelBinarize, ResidualBoundOnDenseGrid) {
    for (int k = -4; k <= 1; ++k) {
        const double alpha = std::ldexp(1.0, k);
        for (int n = 1; n <= 8; ++n) {
            const double bound = alpha * std::ldexp(1.0, 1 - n);
            for (int i = 0; i <= 2000; ++i) {
                const double x = -2 * alpha + 4 * alpha * i / 2000.0;
                ASSERT_LE(std::fabs(multi_level_binarize(x, n, k).residual), bound) << "x=" << x << " n=" << n;
            }
        }
    }
}

TEST(MultiLevelBinarize, CodebookIsOddMultiplesExhaustively) {
    for (int k : {-3, 0, 2})
        for (int n = 1; n <= 6; ++n) {
            std::set<double> from_signs, expected;
            for (std::uint32_t bits = 0; bits < (1u << n); ++bits)
                from_signs.insert(reconstruct(pattern(bits, n), k));
            for (int o = -(1 << n) + 1; o < (1 << n); o += 2) expected.insert(std::ldexp(o, k + 1 - n));
            EXPECT_EQ(from_signs, expected) << "n=" << n;
            EXPECT_EQ(from_signs.size(), std::size_t{1} << n);
            // every codebook point binarizes to itself with zero residual
            for (double c : expected) {
                const auto d = multi_level_binarize(c, n, k);
                EXPECT_EQ(reconstruct(d.signs, k), c);
                EXPECT_EQ(d.residual, 0.0);
            }
        }
}

TEST(MultiLevelBinarize, ReconstructionIsMonotone) {
    for (int n = 1; n <= 6; ++n) {
        double prev = -INFINITY;
        for (int i = 0; i <= 10000; ++i) {
            const double x = -3.0 + 6.0 * i / 10000.0;
            const double v = reconstruct(multi_level_binarize(x, n, 0).signs, 0);
            ASSERT_GE(v, prev) << "x=" << x << " n=" << n;
            prev = v;
        }
    }
}

TEST(OddInteger, ConsistentWithReconstructExactly) {
    // both sides are dyadic rationals with few bits, so binary64 equality is exact equality
    for (int k : {-5, -1, 0, 3})
        for (int n = 1; n <= 6; ++n)
            for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
                const auto s = pattern(bits, n);
                const auto o = to_odd_integer(s);
                ASSERT_EQ(o % 2 != 0, true);
                ASSERT_LE(std::llabs(o), (1 << n) - 1);
                ASSERT_EQ(reconstruct(s, k), std::ldexp(static_cast<double>(o), k + 1 - n));
            }
}

TEST(QuantizeTensor, ZerosGiveAllOnesPlane) {
    const auto q = quantize_tensor(DenseTensor::zeros({5}), 1, -1);
    ASSERT_EQ(q.levels(), 1);
    EXPECT_EQ(q.plane(0).words()[0], 0b11111u);
}

TEST(QuantizeTensor, CodebookPointHasZeroResidual) {
    const auto t = DenseTensor::vector({0.75f});
    const auto q = quantize_tensor(t, 2, -1);
    EXPECT_EQ(q.value(0), 0.75);
    EXPECT_EQ(residual_stats(t, q).max_abs, 0.0);
}

TEST(QuantizeTensor, IdempotentThroughReconstruction) {
    std::mt19937_64 rng(8);
    for (int n = 1; n <= 6; ++n) {
        const auto t = DenseTensor::vector(test::uniform_values(rng, 200, -2.0, 2.0));
        const auto q = quantize_tensor(t, n, 0);
        const auto again = quantize_tensor(dequantize(q), n, 0);
        EXPECT_EQ(q, again) << "n=" << n;
    }
}

TEST(QuantizeTensor, MatchesScalarBinarization) {
    std::mt19937_64 rng(1);
    const auto v = test::uniform_values(rng, 150, -1.5, 1.5);
    const auto q = quantize_tensor(DenseTensor::matrix(10, 15, v), 4, -1);
    EXPECT_EQ(q.shape(), (Shape{10, 15}));
    for (std::size_t e = 0; e < v.size(); ++e) {
        const auto d = multi_level_binarize(v[e], 4, -1);
        ASSERT_EQ(q.signs(e), d.signs);
        ASSERT_EQ(q.odd_code(e), to_odd_integer(d.signs));
        ASSERT_EQ(q.value(e), reconstruct(d.signs, -1));
    }
}

TEST(MultiLevelTensor, StructuralChecks) {
    expect_error(ErrorKind::structural, [] { MultiLevelTensor({3}, 0, {}); });
    expect_error(ErrorKind::structural, [] {
        MultiLevelTensor({3}, 0, {BitPlane::from_words(3, {0}), BitPlane::from_words(4, {0})});
    });
    expect_error(ErrorKind::validation, [] { quantize_tensor(DenseTensor::zeros({2}), 0, 0); });
}

TEST(MultiLevelTensor, SplitRowsKeepsValues) {
    std::mt19937_64 rng(4);
    const auto v = test::uniform_values(rng, 3 * 70, -1, 1);
    const auto q = quantize_tensor(DenseTensor::matrix(3, 70, v), 3, -1);
    const auto rows = q.split_rows();
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 70; ++c) ASSERT_EQ(rows[r].value(c), q.value(r * 70 + c));
}

TEST(SuggestAlpha, Examples) {
    EXPECT_EQ(suggest_alpha(DenseTensor::vector({0.5f, -0.5f})), (std::vector<int>{-4, -3, -2, -1, 0}));
    EXPECT_EQ(suggest_alpha(DenseTensor::vector({1.0f, -1.0f})), (std::vector<int>{-3, -2, -1, 0, 1}));
    EXPECT_EQ(suggest_alpha(DenseTensor::zeros({4})), (std::vector<int>{0}));
}

TEST(SuggestAlpha, AddsPowerNearestTheMean) {
    // max 1 -> {-3..1}; mean |t| = (1 + 31 * 0.001) / 32 ~ 0.0322 -> 2^-5
    std::vector<float> v(32, 0.001f);
    v[0] = 1.0f;
    EXPECT_EQ(suggest_alpha(DenseTensor::vector(v)), (std::vector<int>{-5, -3, -2, -1, 0, 1}));
}

TEST(CoveringAlpha, SmallestScaleCoveringTheRange) {
    const std::vector<float> a{0.5f}, b{0.51f}, c{3.0f}, z{0.0f};
    EXPECT_EQ(covering_alpha(std::span<const float>(a)), -2);
    EXPECT_EQ(covering_alpha(std::span<const float>(b)), -1);
    EXPECT_EQ(covering_alpha(std::span<const float>(c)), 1);
    EXPECT_EQ(covering_alpha(std::span<const float>(z)), 0);
}

TEST(FitAlphaMse, PicksTheLowestErrorCandidate) {
    // one level: reconstruction is +-alpha, so values of magnitude 0.25 prefer k = -2
    const std::vector<float> v{0.25f, -0.25f, 0.25f};
    const std::vector<int> ks{-4, -3, -2, -1, 0};
    EXPECT_EQ(fit_alpha_mse(std::span<const float>(v), 1, std::span<const int>(ks)), -2);
    expect_error(ErrorKind::validation, [&] { fit_alpha_mse(std::span<const float>(v), 1, std::span<const int>()); });
}

TEST(FixedPoint, ScaleRuleOnHalf) {
    // smallest k with 0.5 <= 127 * 2^k is -7; 0.5 * 2^7 = 64 exactly
    const auto q = fixed_point_quantize(DenseTensor::vector({0.5f}), 8);
    EXPECT_EQ(q.scale_exp, -7);
    EXPECT_EQ(q.data, (std::vector<std::int32_t>{64}));
    EXPECT_EQ(q.dequantize()[0], 0.5f);
}

TEST(FixedPoint, ZeroTensor) {
    for (int b : {1, 4, 16}) {
        const auto q = fixed_point_quantize(DenseTensor::zeros({3}), b);
        EXPECT_EQ(q.scale_exp, 0);
        EXPECT_EQ(q.data, (std::vector<std::int32_t>{0, 0, 0}));
    }
}

TEST(FixedPoint, OneBitIsMinusOneOrZero) {
    std::mt19937_64 rng(12);
    const auto q = fixed_point_quantize(DenseTensor::vector(test::uniform_values(rng, 100, -1, 1)), 1);
    for (auto d : q.data) EXPECT_TRUE(d == 0 || d == -1);
}

TEST(FixedPoint, RoundHalfToEvenAndClamp) {
    EXPECT_EQ(fixed_point_code(2.5, 8, 0), 2);
    EXPECT_EQ(fixed_point_code(3.5, 8, 0), 4);
    EXPECT_EQ(fixed_point_code(-2.5, 8, 0), -2);
    EXPECT_EQ(fixed_point_code(500.0, 8, 0), 127);
    EXPECT_EQ(fixed_point_code(-500.0, 8, 0), -128);
}

TEST(FixedPoint, ErrorWithinHalfStep) {
    std::mt19937_64 rng(21);
    for (int b = 2; b <= 16; ++b) {
        const auto t = DenseTensor::vector(test::uniform_values(rng, 300, -3, 3));
        const auto q = fixed_point_quantize(t, b);
        const auto d = q.dequantize();
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (q.data[i] == fixed_point_max(b) || q.data[i] == fixed_point_min(b)) continue;
            ASSERT_LE(std::fabs(double(t[i]) - double(d[i])), std::ldexp(1.0, q.scale_exp - 1)) << b;
        }
        // the positive extreme never saturates under the scale rule
        EXPECT_LE(t.max_abs(), fixed_point_max(b) * std::ldexp(1.0, q.scale_exp));
    }
}

TEST(FixedPoint, BitWidthRange) {
    expect_error(ErrorKind::validation, [] { fixed_point_quantize(DenseTensor::zeros({1}), 0); });
    expect_error(ErrorKind::validation, [] { fixed_point_quantize(DenseTensor::zeros({1}), 17); });
}
