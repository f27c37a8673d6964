#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "mlbin/readout.hpp"
#include "test_util.hpp"

using namespace mlbin;
using mlbin::test::expect_error;

namespace {

FeatureMatrix make_features(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return {rows, cols, std::move(data)};
}

double accuracy(const ClassifierHead& head, const FeatureMatrix& f, const std::vector<std::uint32_t>& labels) {
    std::size_t ok = 0;
    for (std::size_t r = 0; r < f.rows; ++r) {
        std::vector<float> row(f.cols);
        for (std::size_t c = 0; c < f.cols; ++c) row[c] = static_cast<float>(f(r, c));
        ok += classify(head, std::span<const float>(row)) == labels[r];
    }
    return double(ok) / double(f.rows);
}

using Mat3 = std::array<std::array<double, 3>, 3>;

// Inverse by the adjugate.
Mat3 inverse3(const Mat3& m) {
    auto cof = [&](int r, int c) {
        const int r0 = (r + 1) % 3, r1 = (r + 2) % 3, c0 = (c + 1) % 3, c1 = (c + 2) % 3;
        return m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    };
    const double det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    Mat3 inv{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) inv[r][c] = cof(c, r) / det;
    return inv;
}

}  // namespace

TEST(Ridge, SeparableOneFeature) {
    const auto f = make_features(6, 1, {-3, -2, -1, 1, 2, 3});
    const std::vector<std::uint32_t> y{0, 0, 0, 1, 1, 1};
    EXPECT_EQ(accuracy(fit_readout(f, y, 2), f, y), 1.0);
}

TEST(Ridge, MatchesCofactorOracle) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t s = 40;
    std::vector<double> data(s * 3);
    for (auto& v : data) v = n(rng);
    std::vector<std::uint32_t> y(s);
    for (std::size_t i = 0; i < s; ++i) y[i] = data[i * 3] + 0.5 * data[i * 3 + 2] + 0.3 * n(rng) > 0;
    const auto f = make_features(s, 3, data);
    const double lambda = 0.7;
    RidgeSpec spec;
    spec.lambda = lambda;
    const auto head = fit_readout(f, y, 2, spec);

    std::array<double, 3> mean{};
    double ymean[2] = {0, 0};
    for (std::size_t i = 0; i < s; ++i) {
        for (int c = 0; c < 3; ++c) mean[c] += data[i * 3 + c] / s;
        for (int k = 0; k < 2; ++k) ymean[k] += (y[i] == std::uint32_t(k) ? 1.0 : -1.0) / s;
    }
    Mat3 g{};
    std::array<std::array<double, 2>, 3> rhs{};
    for (std::size_t i = 0; i < s; ++i)
        for (int a = 0; a < 3; ++a) {
            const double fa = data[i * 3 + a] - mean[a];
            for (int b = 0; b < 3; ++b) g[a][b] += fa * (data[i * 3 + b] - mean[b]);
            for (int k = 0; k < 2; ++k) rhs[a][k] += fa * ((y[i] == std::uint32_t(k) ? 1.0 : -1.0) - ymean[k]);
        }
    for (int a = 0; a < 3; ++a) g[a][a] += lambda;
    const auto inv = inverse3(g);
    for (int k = 0; k < 2; ++k) {
        double b = ymean[k];
        for (int a = 0; a < 3; ++a) {
            double w = 0.0;
            for (int c = 0; c < 3; ++c) w += inv[a][c] * rhs[c][k];
            EXPECT_NEAR(head.weights(k, a), w, 1e-6 * std::max(1.0, std::fabs(w)));
            b -= w * mean[a];
        }
        EXPECT_NEAR(head.bias[k], b, 1e-6);
    }
}

TEST(Ridge, NormalEquationResidual) {
    std::mt19937_64 rng(4);
    const std::size_t s = 200, n = 12;
    std::vector<double> data(s * n);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : data) v = u(rng);
    std::vector<std::uint32_t> y(s);
    for (auto& l : y) l = static_cast<std::uint32_t>(rng() % 3);
    const auto f = make_features(s, n, data);
    const auto head = fit_readout(f, y, 3);
    // recompute in double from the stored (binary32) weights
    const auto fe = detail::as_eigen(f);
    const Eigen::MatrixXd fc = fe.rowwise() - fe.colwise().mean();
    Eigen::MatrixXd yc = detail::one_hot_pm(y, 3);
    yc = yc.rowwise() - yc.colwise().mean();
    Eigen::MatrixXd w(n, 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < n; ++k) w(Eigen::Index(k), Eigen::Index(c)) = head.weights(c, k);
    Eigen::MatrixXd lhs = fc.transpose() * fc * w + 1e-2 * w;
    const double rel = (lhs - fc.transpose() * yc).norm() / (fc.transpose() * yc).norm();
    EXPECT_LE(rel, 1e-6);
}

TEST(Ridge, LargeLambdaPredictsMajority) {
    const auto f = make_features(5, 2, {1, 0, 0, 1, 2, 2, -1, 3, 0, 0});
    const std::vector<std::uint32_t> y{1, 1, 0, 1, 0};
    RidgeSpec spec;
    spec.lambda = 1e9;
    const auto head = fit_readout(f, y, 2, spec);
    for (std::size_t r = 0; r < 5; ++r) {
        const std::vector<float> row{float(f(r, 0)), float(f(r, 1))};
        EXPECT_EQ(classify(head, std::span<const float>(row)), 1u);
    }
}

TEST(Ridge, RowOrderInvariant) {
    std::mt19937_64 rng(5);
    const std::size_t s = 30, n = 4;
    std::vector<double> data(s * n);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : data) v = u(rng);
    std::vector<std::uint32_t> y(s);
    for (auto& l : y) l = rng() & 1u;
    std::vector<std::size_t> perm(s);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pd(s * n);
    std::vector<std::uint32_t> py(s);
    for (std::size_t i = 0; i < s; ++i) {
        std::copy_n(data.begin() + perm[i] * n, n, pd.begin() + i * n);
        py[i] = y[perm[i]];
    }
    const auto a = fit_readout(make_features(s, n, data), y, 2);
    const auto b = fit_readout(make_features(s, n, pd), py, 2);
    for (std::size_t i = 0; i < a.weights.size(); ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-5);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a.bias[i], b.bias[i], 1e-5);
}

TEST(Ridge, WeightNormShrinksWithLambda) {
    std::mt19937_64 rng(6);
    const std::size_t s = 50, n = 5;
    std::vector<double> data(s * n);
    std::normal_distribution<double> g(0, 1);
    for (auto& v : data) v = g(rng);
    std::vector<std::uint32_t> y(s);
    for (std::size_t i = 0; i < s; ++i) y[i] = data[i * n] > 0;
    double prev = INFINITY;
    for (double lambda : {1e-3, 1e-1, 1.0, 10.0, 1e3}) {
        RidgeSpec spec;
        spec.lambda = lambda;
        const auto h = fit_readout(make_features(s, n, data), y, 2, spec);
        double norm = 0.0;
        for (float w : h.weights.values()) norm += double(w) * w;
        EXPECT_LT(norm, prev) << lambda;
        prev = norm;
    }
}

TEST(Ridge, Errors) {
    const auto f = make_features(2, 1, {1, 2});
    expect_error(ErrorKind::dimension, [&] { fit_readout(f, std::vector<std::uint32_t>{0}, 2); });
    expect_error(ErrorKind::validation, [&] { fit_readout(f, std::vector<std::uint32_t>{0, 2}, 2); });
    RidgeSpec zero;
    zero.lambda = 0.0;
    expect_error(ErrorKind::validation, [&] { fit_readout(f, std::vector<std::uint32_t>{0, 1}, 2, zero); });
    // duplicated, huge column with a tiny lambda: the regularized Gram matrix is numerically singular
    std::vector<double> dup;
    for (int i = 0; i < 10; ++i) dup.insert(dup.end(), {1e6 * i, 1e6 * i});
    RidgeSpec tiny;
    tiny.lambda = 1e-12;
    expect_error(ErrorKind::numeric, [&] {
        fit_readout(make_features(10, 2, dup), std::vector<std::uint32_t>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, 2, tiny);
    });
}

TEST(Pipeline, NoiselessSynthIsLearned) {
    const auto d = synth_dataset(11, 200, 40, 4, 2, {0.0, 0.0});
    TrainOptions opt;
    opt.n_hidden = 16;
    const auto r = train_pipeline(d, opt);
    EXPECT_GE(r.accuracy, 0.95);
    EXPECT_GE(r.train_accuracy, 0.95);
}

TEST(Pipeline, ShuffledLabelsAreChance) {
    auto d = synth_dataset(12, 600, 30, 4, 2);
    std::mt19937_64 rng(99);
    std::shuffle(d.labels.begin(), d.labels.end(), rng);
    TrainOptions opt;
    opt.n_hidden = 16;
    const auto r = train_pipeline(d, opt);
    EXPECT_NEAR(r.accuracy, 0.5, 0.08);
}

TEST(Pipeline, DeterministicAndWorkerInvariant) {
    const auto d = synth_dataset(13, 80, 20, 3, 2);
    TrainOptions opt;
    opt.n_hidden = 8;
    const auto a = train_pipeline(d, opt);
    opt.workers = 4;
    const auto b = train_pipeline(d, opt);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.head, b.head);
    EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(Pipeline, GivenParamsMustMatchFeatures) {
    const auto d = synth_dataset(14, 20, 5, 3, 2);
    expect_error(ErrorKind::dimension, [&] { train_pipeline(d, {}, random_lstm(4, 2, 1, 0.5)); });
    Dataset unlabelled = d;
    unlabelled.n_classes = 0;
    unlabelled.labels.clear();
    expect_error(ErrorKind::validation, [&] { train_pipeline(unlabelled, {}); });
}
