#pragma once

// Labelled sequence datasets: the binary container, a seeded synthetic
// generator of multi-channel sinusoid classes, and a seeded train/test split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mlbin/bytes.hpp"
#include "mlbin/error.hpp"
#include "mlbin/tensor.hpp"

namespace mlbin {

/// S sequences of T steps with F features each, plus one label per sequence.
/// n_classes == 0 marks an unlabelled dataset (labels empty).
struct Dataset {
    std::size_t samples = 0;
    std::size_t timesteps = 0;
    std::size_t features = 0;
    std::size_t n_classes = 0;
    std::vector<float> data;  // S x T x F, row-major
    std::vector<std::uint32_t> labels;

    void validate() const {
        detail::require(samples >= 1 && timesteps >= 1 && features >= 1, ErrorKind::validation,
                        "dataset dimensions must be positive");
        detail::require(data.size() == samples * timesteps * features, ErrorKind::dimension,
                        "dataset payload does not match S x T x F");
        for (float v : data) detail::require(std::isfinite(v), ErrorKind::validation, "non-finite dataset value");
        if (n_classes == 0) {
            detail::require(labels.empty(), ErrorKind::validation, "unlabelled dataset carries labels");
            return;
        }
        detail::require(labels.size() == samples, ErrorKind::dimension, "one label per sample required");
        for (auto l : labels)
            if (l >= n_classes)
                detail::fail(ErrorKind::validation,
                             "label " + std::to_string(l) + " outside [0," + std::to_string(n_classes) + ")");
    }

    bool labelled() const noexcept { return n_classes > 0 && labels.size() == samples; }

    /// Sample s as a T x F tensor.
    DenseTensor sequence(std::size_t s) const {
        const auto stride = timesteps * features;
        auto first = data.begin() + static_cast<std::ptrdiff_t>(s * stride);
        return DenseTensor::matrix(timesteps, features,
                                   std::vector<float>(first, first + static_cast<std::ptrdiff_t>(stride)));
    }

    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out{indices.size(), timesteps, features, n_classes, {}, {}};
        const auto stride = timesteps * features;
        out.data.reserve(indices.size() * stride);
        for (auto i : indices) {
            auto first = data.begin() + static_cast<std::ptrdiff_t>(i * stride);
            out.data.insert(out.data.end(), first, first + static_cast<std::ptrdiff_t>(stride));
            if (labelled()) out.labels.push_back(labels[i]);
        }
        return out;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthOptions {
    double noise_sigma = 1.5;
    double phase_jitter = 0.5;  // std-dev of the per-sample, per-channel phase offset (radians)
};

/// Whole cycles per sequence of channel f in class k. Channel 0 carries
/// cycles 1 + k, so classes are separable by frequency alone.
inline std::size_t synth_cycles(std::size_t k, std::size_t f, std::size_t n_classes) {
    return 1 + k + n_classes * (f % 3);
}

/// Class k, channel f: sin(2 pi nu_kf t / T + phi_kf + jitter) + N(0, sigma^2),
/// with phi_kf drawn once per seed. Labels are balanced to within one sample.
inline Dataset synth_dataset(std::uint64_t seed, std::size_t samples, std::size_t timesteps, std::size_t features,
                             std::size_t n_classes, const SynthOptions& opt = {}) {
    detail::require(samples >= 1 && timesteps >= 1 && features >= 1 && n_classes >= 1, ErrorKind::validation,
                    "synth dimensions must be positive");
    detail::require(opt.noise_sigma >= 0.0 && opt.phase_jitter >= 0.0, ErrorKind::validation,
                    "noise parameters must be non-negative");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> unit(0.0, 1.0);

    std::vector<double> phase(n_classes * features);
    for (auto& p : phase) p = phase_dist(rng);

    Dataset d{samples, timesteps, features, n_classes, {}, {}};
    d.labels.resize(samples);
    for (std::size_t s = 0; s < samples; ++s) d.labels[s] = static_cast<std::uint32_t>(s % n_classes);
    std::shuffle(d.labels.begin(), d.labels.end(), rng);

    d.data.resize(samples * timesteps * features);
    std::vector<double> jitter(features);
    for (std::size_t s = 0; s < samples; ++s) {
        const auto k = d.labels[s];
        for (auto& j : jitter) j = opt.phase_jitter * unit(rng);
        for (std::size_t t = 0; t < timesteps; ++t) {
            for (std::size_t f = 0; f < features; ++f) {
                const double w = 2.0 * std::numbers::pi * static_cast<double>(synth_cycles(k, f, n_classes)) /
                                 static_cast<double>(timesteps);
                const double v = std::sin(w * static_cast<double>(t) + phase[k * features + f] + jitter[f]) +
                                 opt.noise_sigma * unit(rng);
                d.data[(s * timesteps + t) * features + f] = static_cast<float>(v);
            }
        }
    }
    return d;
}

/// Seeded shuffle, then the first round(train_fraction * S) samples train.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, std::uint64_t seed, double train_fraction = 0.8) {
    detail::require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::validation,
                    "train fraction must lie in (0,1)");
    std::vector<std::size_t> idx(d.samples);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(d.samples)));
    n_train = std::clamp<std::size_t>(n_train, 1, d.samples > 1 ? d.samples - 1 : 1);
    std::span<const std::size_t> all(idx);
    return {d.subset(all.first(n_train)), d.subset(all.subspan(n_train))};
}

// Binary container: u32 magic "MLDS", u32 version, u32 S, T, F, n_classes,
// then S*T*F binary32 values, then S u32 labels (absent when n_classes == 0).
inline constexpr std::uint32_t dataset_magic = 0x53444C4Du;  // "MLDS" little-endian
inline constexpr std::uint32_t dataset_version = 1;

inline std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
    d.validate();
    std::vector<std::uint8_t> out;
    out.reserve(24 + d.data.size() * 4 + d.labels.size() * 4);
    bytes::put_le<std::uint32_t>(out, dataset_magic);
    bytes::put_le<std::uint32_t>(out, dataset_version);
    for (auto v : {d.samples, d.timesteps, d.features, d.n_classes}) {
        detail::require(v <= 0xFFFFFFFFu, ErrorKind::validation, "dataset dimension exceeds 32 bits");
        bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    for (float v : d.data) bytes::put_le<float>(out, v);
    for (auto l : d.labels) bytes::put_le<std::uint32_t>(out, l);
    return out;
}

inline Dataset decode_dataset(std::span<const std::uint8_t> buf) {
    bytes::Reader in(buf, "dataset header");
    const auto magic = in.get_le<std::uint32_t>();
    detail::require(magic == dataset_magic, ErrorKind::magic, "not a dataset file (bad magic)");
    const auto version = in.get_le<std::uint32_t>();
    if (version != dataset_version)
        detail::fail(ErrorKind::version, "dataset version " + std::to_string(version) + " unsupported (expected " +
                                             std::to_string(dataset_version) + ")");
    Dataset d;
    d.samples = in.get_le<std::uint32_t>();
    d.timesteps = in.get_le<std::uint32_t>();
    d.features = in.get_le<std::uint32_t>();
    d.n_classes = in.get_le<std::uint32_t>();
    const std::uint64_t values = std::uint64_t{d.samples} * d.timesteps * d.features;
    const std::uint64_t expected = values * 4 + (d.n_classes > 0 ? std::uint64_t{d.samples} * 4 : 0);
    if (in.remaining() != expected)
        detail::fail(ErrorKind::size_mismatch, "dataset payload is " + std::to_string(in.remaining()) +
                                                   " bytes, header declares " + std::to_string(expected));
    d.data.resize(values);
    for (auto& v : d.data) v = in.get_le<float>();
    if (d.n_classes > 0) {
        d.labels.resize(d.samples);
        for (auto& l : d.labels) l = in.get_le<std::uint32_t>();
    }
    d.validate();
    return d;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::fail(ErrorKind::io, "cannot open " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) detail::fail(ErrorKind::io, "read failed for " + path.string());
    return buf;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) detail::fail(ErrorKind::io, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) detail::fail(ErrorKind::io, "write failed for " + path.string());
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& d) { write_file(path, encode_dataset(d)); }

inline Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace mlbin
