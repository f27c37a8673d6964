#pragma once

// Closed-form ridge readout on frozen LSTM features, and the end-to-end
// pipeline that builds a random LSTM, extracts features and fits the head.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mlbin/binarized_lstm.hpp"
#include "mlbin/dataset.hpp"
#include "mlbin/error.hpp"
#include "mlbin/lstm.hpp"
#include "mlbin/parallel.hpp"

namespace mlbin {

struct RidgeSpec {
    double lambda = 1e-2;
    FeatureSource features = FeatureSource::mean_hidden;
    // smallest acceptable reciprocal condition estimate of the regularized Gram matrix
    double min_rcond = 1e-14;
};

/// Row-major S x N feature matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

namespace detail {

using MatrixXdRow = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const MatrixXdRow> as_eigen(const FeatureMatrix& f) {
    return {f.data.data(), static_cast<Eigen::Index>(f.rows), static_cast<Eigen::Index>(f.cols)};
}

/// One-hot targets in {-1, +1}.
inline Eigen::MatrixXd one_hot_pm(std::span<const std::uint32_t> labels, std::size_t n_classes) {
    Eigen::MatrixXd y =
        Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(n_classes), -1.0);
    for (std::size_t s = 0; s < labels.size(); ++s) y(static_cast<Eigen::Index>(s), labels[s]) = 1.0;
    return y;
}

}  // namespace detail

/// Ridge fit on centered features and targets: W = Yc^T Fc (Fc^T Fc + lambda I)^-1,
/// intercept b = mean(Y) - W mean(F), solved by Cholesky.
inline ClassifierHead fit_readout(const FeatureMatrix& features, std::span<const std::uint32_t> labels,
                                  std::size_t n_classes, const RidgeSpec& spec = {}) {
    detail::require(spec.lambda > 0.0, ErrorKind::validation, "ridge lambda must be positive");
    detail::require(features.rows == labels.size() && features.rows > 0 && features.cols > 0, ErrorKind::dimension,
                    "feature rows must match labels");
    detail::require(n_classes >= 1, ErrorKind::validation, "need at least one class");
    for (auto l : labels) detail::require(l < n_classes, ErrorKind::validation, "label outside class range");

    const auto f = detail::as_eigen(features);
    const Eigen::MatrixXd y = detail::one_hot_pm(labels, n_classes);
    const Eigen::RowVectorXd f_mean = f.colwise().mean();
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    const Eigen::MatrixXd fc = f.rowwise() - f_mean;
    const Eigen::MatrixXd yc = y.rowwise() - y_mean;

    Eigen::MatrixXd gram = fc.transpose() * fc;
    gram.diagonal().array() += spec.lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= spec.min_rcond))
        detail::fail(ErrorKind::numeric, "ridge system is ill-conditioned (rcond " + std::to_string(llt.rcond()) + ")");
    const Eigen::MatrixXd wt = llt.solve(fc.transpose() * yc);  // N x C
    const Eigen::VectorXd b = y_mean.transpose() - wt.transpose() * f_mean.transpose();

    std::vector<float> w(n_classes * features.cols), bias(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t k = 0; k < features.cols; ++k)
            w[c * features.cols + k] =
                static_cast<float>(wt(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)));
        bias[c] = static_cast<float>(b(static_cast<Eigen::Index>(c)));
    }
    return {DenseTensor::matrix(n_classes, features.cols, std::move(w)), DenseTensor::vector(std::move(bias))};
}

/// Features of every sample, computed in parallel; row s belongs to sample s.
template <SequenceModel M>
FeatureMatrix extract_features(const M& model, const Dataset& data, FeatureSource src, std::size_t workers = 1) {
    FeatureMatrix out;
    out.rows = data.samples;
    std::vector<std::vector<float>> rows(data.samples);
    parallel_for(data.samples, workers,
                 [&](std::size_t s) { rows[s] = sequence_features(model, data.sequence(s), src); });
    out.cols = rows.empty() ? 0 : rows.front().size();
    out.data.reserve(out.rows * out.cols);
    for (const auto& r : rows) out.data.insert(out.data.end(), r.begin(), r.end());
    return out;
}

struct TrainOptions {
    std::size_t n_hidden = 32;
    std::uint64_t init_seed = 1;
    std::uint64_t split_seed = 1;
    double train_fraction = 0.8;
    std::optional<double> init_range;  // default 1/sqrt(N_h)
    RidgeSpec ridge;
    std::size_t workers = 1;
};

struct TrainResult {
    LstmParams params;
    ClassifierHead head;
    double train_accuracy = 0.0;
    double accuracy = 0.0;  // held-out split
};

/// Random LSTM (uniform(-r, r)) unless `params` is given, ridge head on the
/// training split, accuracy on the held-out split.
inline TrainResult train_pipeline(const Dataset& data, const TrainOptions& opt,
                                  std::optional<LstmParams> params = std::nullopt) {
    data.validate();
    detail::require(data.labelled(), ErrorKind::validation, "training needs a labelled dataset");
    TrainResult res;
    if (params) {
        res.params = std::move(*params);
        res.params.validate();
        detail::require(res.params.n_input == data.features, ErrorKind::dimension,
                        "model input width does not match dataset features");
    } else {
        const double r = opt.init_range.value_or(1.0 / std::sqrt(static_cast<double>(opt.n_hidden)));
        res.params = random_lstm(data.features, opt.n_hidden, opt.init_seed, r);
    }
    const auto [train, test] = split_dataset(data, opt.split_seed, opt.train_fraction);
    const auto feats = extract_features(res.params, train, opt.ridge.features, opt.workers);
    res.head = fit_readout(feats, train.labels, data.n_classes, opt.ridge);

    auto accuracy_of = [&](const FeatureMatrix& f, const Dataset& d) {
        std::size_t correct = 0;
        std::vector<float> row(f.cols);
        for (std::size_t s = 0; s < f.rows; ++s) {
            for (std::size_t k = 0; k < f.cols; ++k) row[k] = static_cast<float>(f(s, k));
            correct += classify(res.head, std::span<const float>(row)) == d.labels[s];
        }
        return static_cast<double>(correct) / static_cast<double>(f.rows);
    };
    res.train_accuracy = accuracy_of(feats, train);
    res.accuracy = accuracy_of(extract_features(res.params, test, opt.ridge.features, opt.workers), test);
    return res;
}

}  // namespace mlbin
