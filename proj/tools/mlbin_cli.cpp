// mlbin: synthesize data, train the FP reference, quantize, evaluate,
// explore scaling grids, cost the MAC and compare quantization schemes.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mlbin/calibration.hpp"
#include "mlbin/mlbin.hpp"

namespace fs = std::filesystem;
using namespace mlbin;

namespace {

FeatureSource parse_features(const std::string& s) {
    if (s == "mean") return FeatureSource::mean_hidden;
    if (s == "final") return FeatureSource::final_hidden;
    throw Error(ErrorKind::config, "features must be mean or final, got '" + s + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void emit(const std::optional<std::string>& path, const std::string& text) {
    if (path) write_text(*path, text);
    else std::cout << text;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// "X=-1,B=-1" or "X=5:-1,B=5:-1" (levels:alpha_exp)
std::pair<GroupSelector, GroupSelector> parse_slice(const std::string& text) {
    std::optional<GroupSelector> x, b;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::config, "slice item '" + item + "' is not GROUP=VALUE");
        const auto name = item.substr(0, eq);
        const auto value = item.substr(eq + 1);
        GroupSelector sel;
        if (const auto colon = value.find(':'); colon != std::string::npos) {
            sel.levels = detail::parse_number<int>(value.substr(0, colon), name);
            sel.alpha_exp = detail::parse_number<int>(value.substr(colon + 1), name);
        } else {
            sel.alpha_exp = detail::parse_number<int>(value, name);
        }
        if (name == "X" || name == "x") x = sel;
        else if (name == "B" || name == "b" || name == "bias") b = sel;
        else throw Error(ErrorKind::config, "slice group must be X or B, got '" + name + "'");
    }
    if (!x || !b) throw Error(ErrorKind::config, "slice needs both X and B");
    return {*x, *b};
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw Error(ErrorKind::config, "level pair '" + item + "' is not M:N");
        out.emplace_back(detail::parse_number<int>(item.substr(0, colon), "pairs"),
                         detail::parse_number<int>(item.substr(colon + 1), "pairs"));
    }
    if (out.empty()) throw Error(ErrorKind::config, "no level pairs given");
    return out;
}

struct Args {
    // shared
    std::string data, model, out, config;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string features = "mean";
    // synth
    std::size_t samples = 600, timesteps = 100, n_features = 32, classes = 2;
    double noise = SynthOptions{}.noise_sigma, jitter = SynthOptions{}.phase_jitter;
    // train
    std::size_t hidden = 32;
    double lambda = RidgeSpec{}.lambda, train_fraction = 0.8;
    std::optional<std::uint64_t> split_seed;
    // quantize
    std::vector<std::string> overrides;
    // explore
    std::string spec;
    std::optional<std::string> csv, best, slice, slice_csv;
    bool full_data = false;
    // cost
    std::optional<std::string> constants, table;
    std::string normalize = "fp";
    std::size_t dot_length = 32;
    int max_levels = 5;
    bool multiplier_only = false;
    // compare
    std::string pairs = "3:4,3:5,4:4,4:5,5:4,5:5";
    std::size_t calib_samples = 64;
    std::string alpha = "search";
    std::size_t tune_samples = 160;
};

std::pair<Dataset, Dataset> split_for_eval(const Args& a, const Dataset& d) {
    return split_dataset(d, a.split_seed.value_or(*a.seed), a.train_fraction);
}

int run_synth(const Args& a) {
    const auto d = synth_dataset(*a.seed, a.samples, a.timesteps, a.n_features, a.classes, {a.noise, a.jitter});
    save_dataset(a.out, d);
    std::cout << "samples=" << d.samples << " timesteps=" << d.timesteps << " features=" << d.features
              << " classes=" << d.n_classes << "\n";
    return 0;
}

int run_train(const Args& a) {
    const auto d = load_dataset(a.data);
    TrainOptions opt;
    opt.n_hidden = a.hidden;
    opt.init_seed = *a.seed;
    opt.split_seed = a.split_seed.value_or(*a.seed);
    opt.train_fraction = a.train_fraction;
    opt.ridge.lambda = a.lambda;
    opt.ridge.features = parse_features(a.features);
    opt.workers = a.workers;
    const auto res = train_pipeline(d, opt);
    save_model(a.out, res.params, res.head);
    std::cout << "train_accuracy=" << fmt("%.6f", res.train_accuracy) << "\n"
              << "accuracy=" << fmt("%.6f", res.accuracy) << "\n";
    return 0;
}

int run_quantize(const Args& a) {
    const auto m = load_model(a.model);
    print_warnings(m.warnings);
    std::optional<ScalingConfig> base;
    if (!a.config.empty()) base = scaling_config_from(load_key_values(a.config));
    KeyValues kv;
    for (const auto& o : a.overrides) {
        const auto parsed = parse_key_values(o);
        kv.insert(parsed.begin(), parsed.end());
    }
    const auto cfg = scaling_config_from(kv, base);
    const auto q = quantize_lstm(m.params, cfg);
    save_qmodel(a.out, q, m.head);
    std::cout << "config " << cfg.to_string() << "\n";
    for (auto g : {Group::wfwd, Group::wrec, Group::bias}) {
        double max_res = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (auto gate : all_gates) {
            const DenseTensor& orig = g == Group::wfwd   ? m.params.w_fwd[index(gate)]
                                      : g == Group::wrec ? m.params.w_rec[index(gate)]
                                                         : m.params.bias[index(gate)];
            const MultiLevelTensor& mq = g == Group::wfwd   ? q.w_fwd(gate)
                                         : g == Group::wrec ? q.w_rec(gate)
                                                            : q.bias(gate);
            const auto st = residual_stats(orig, mq);
            max_res = std::max(max_res, st.max_abs);
            sq += st.rms * st.rms * static_cast<double>(orig.size());
            n += orig.size();
        }
        const auto c = cfg[g];
        std::cout << "group=" << group_name(g) << " levels=" << c.levels << " alpha_exp=" << c.alpha_exp
                  << " max_residual=" << fmt("%.6g", max_res)
                  << " rms_residual=" << fmt("%.6g", std::sqrt(sq / static_cast<double>(n)))
                  << " bound=" << fmt("%.6g", pow2(c.alpha_exp + 1 - c.levels)) << "\n";
    }
    return 0;
}

int run_eval(const Args& a) {
    const auto d = load_dataset(a.data);
    const auto src = parse_features(a.features);
    double acc = 0.0;
    if (model_dir_format(a.model) == qmodel_format) {
        const auto m = load_qmodel(a.model);
        print_warnings(m.warnings);
        acc = evaluate_accuracy(m.params, m.head, d, src);
    } else {
        const auto m = load_model(a.model);
        print_warnings(m.warnings);
        acc = evaluate_accuracy(m.params, m.head, d, src);
    }
    std::cout << "accuracy=" << fmt("%.6f", acc) << "\n";
    return 0;
}

int run_explore(const Args& a) {
    const auto m = load_model(a.model);
    print_warnings(m.warnings);
    const auto d = load_dataset(a.data);
    auto spec = exploration_spec_from(load_key_values(a.spec));
    spec = resolve_candidates(spec, m.params, d);
    const auto eval_set = a.full_data ? d : split_for_eval(a, d).second;
    const auto total = enumerate_configs(spec).size();
    std::cerr << "evaluating " << total << " configurations on " << eval_set.samples << " samples with "
              << a.workers << " worker(s)\n";
    const auto res = explore(m.params, m.head, eval_set, spec, a.workers);
    std::cerr << "explored " << res.total() << " configurations in " << fmt("%.2f", res.wall_seconds) << " s\n";
    if (a.csv) write_text(*a.csv, exploration_csv(res));
    if (a.best) write_text(*a.best, scaling_config_text(res.best().config));
    if (a.slice) {
        const auto [x, b] = parse_slice(*a.slice);
        emit(a.slice_csv, slice_csv(grid_slice(res, x, b)));
    }
    std::cout << "best " << res.best().config.to_string() << " accuracy=" << fmt("%.6f", res.best().accuracy)
              << "\n";
    return 0;
}

int run_cost(const Args& a) {
    GateCostParams gc;
    if (a.constants) gc = gate_cost_params_from(load_key_values(*a.constants));
    Normalization norm;
    if (a.normalize == "fp") norm = Normalization::full_precision;
    else if (a.normalize == "max55") norm = Normalization::max55;
    else throw Error(ErrorKind::config, "normalize must be fp or max55");
    const CostOptions opt{a.multiplier_only};
    emit(a.out.empty() ? std::nullopt : std::optional(a.out), cost_csv(cost_grid(a.max_levels, a.dot_length, gc, norm, opt)));

    std::string table = "config,area,delay,normalized_area,normalized_delay\n";
    table += "full_precision," + fmt("%.6g", gc.fp_baseline_area) + "," + fmt("%.6g", gc.fp_baseline_delay) + ",1,1\n";
    for (const auto& r : reference_rows(a.dot_length, gc, opt))
        table += "(" + std::to_string(r.input_levels) + "," + std::to_string(r.weight_levels) + ")," +
                 fmt("%.6g", r.area) + "," + fmt("%.6g", r.delay) + "," + fmt("%.4f", r.normalized_area) + "," +
                 fmt("%.4f", r.normalized_delay) + "\n";
    if (a.table) write_text(*a.table, table);
    else if (!a.out.empty()) std::cout << table;
    return 0;
}

int run_compare(const Args& a) {
    const auto m = load_model(a.model);
    print_warnings(m.warnings);
    const auto d = load_dataset(a.data);
    const auto [train, test] = split_for_eval(a, d);
    CompareOptions opt;
    if (a.alpha == "mse") opt.alpha = AlphaChoice::mse;
    else if (a.alpha == "search") opt.alpha = AlphaChoice::search;
    else throw Error(ErrorKind::config, "alpha must be mse or search");
    opt.calibration_samples = a.calib_samples;
    opt.tune_samples = a.tune_samples;
    opt.features = parse_features(a.features);
    opt.workers = a.workers;
    const auto pairs = parse_pairs(a.pairs);
    emit(a.out.empty() ? std::nullopt : std::optional(a.out),
         comparison_csv(compare_schemes(m.params, m.head, train, test, pairs, opt)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-level binarized LSTM toolkit"};
    app.require_subcommand(1);
    Args a;

    auto* synth = app.add_subcommand("synth", "Generate a labelled sinusoid classification dataset");
    synth->add_option("--seed", a.seed, "RNG seed")->required();
    synth->add_option("--samples", a.samples)->check(CLI::PositiveNumber);
    synth->add_option("--timesteps", a.timesteps)->check(CLI::PositiveNumber);
    synth->add_option("--features", a.n_features)->check(CLI::PositiveNumber);
    synth->add_option("--classes", a.classes)->check(CLI::PositiveNumber);
    synth->add_option("--noise", a.noise, "Additive Gaussian noise std-dev");
    synth->add_option("--jitter", a.jitter, "Per-sample phase jitter std-dev (radians)");
    synth->add_option("-o,--out", a.out, "Output dataset file")->required();

    auto* train = app.add_subcommand("train", "Random-init LSTM plus ridge readout");
    train->add_option("--data", a.data)->required();
    train->add_option("--seed", a.seed, "Init seed; also the split seed unless --split-seed is given")->required();
    train->add_option("--split-seed", a.split_seed);
    train->add_option("--hidden", a.hidden)->check(CLI::PositiveNumber);
    train->add_option("--lambda", a.lambda);
    train->add_option("--train-fraction", a.train_fraction);
    train->add_option("--feature-source", a.features, "mean|final");
    train->add_option("--workers", a.workers)->check(CLI::PositiveNumber);
    train->add_option("-o,--out", a.out, "Output model directory")->required();

    auto* quantize = app.add_subcommand("quantize", "Quantize a model with a scaling config");
    quantize->add_option("--model", a.model)->required();
    quantize->add_option("--config", a.config, "Scaling config file");
    quantize->add_option("--set", a.overrides, "Override, e.g. --set x.levels=3");
    quantize->add_option("-o,--out", a.out, "Output qmodel directory")->required();

    auto* eval = app.add_subcommand("eval", "Accuracy of a model or qmodel on a dataset");
    eval->add_option("--model", a.model)->required();
    eval->add_option("--data", a.data)->required();
    eval->add_option("--feature-source", a.features, "mean|final");

    auto* explore_cmd = app.add_subcommand("explore", "Exhaustive scaling-config search");
    explore_cmd->add_option("--model", a.model)->required();
    explore_cmd->add_option("--data", a.data)->required();
    explore_cmd->add_option("--spec", a.spec, "Candidate grid file")->required();
    explore_cmd->add_option("--seed", a.seed, "Split seed selecting the held-out evaluation set");
    explore_cmd->add_option("--train-fraction", a.train_fraction);
    explore_cmd->add_flag("--full-data", a.full_data, "Evaluate on the whole dataset instead of the held-out split");
    explore_cmd->add_option("--workers", a.workers)->check(CLI::PositiveNumber);
    explore_cmd->add_option("--csv", a.csv, "Write every evaluated config");
    explore_cmd->add_option("--best", a.best, "Write the best config as a scaling config file");
    explore_cmd->add_option("--slice", a.slice, "Wfwd x Wrec table at fixed X and B, e.g. X=-1,B=5:-1");
    explore_cmd->add_option("--slice-csv", a.slice_csv, "Slice output file (stdout when absent)");

    auto* cost = app.add_subcommand("cost", "Area/delay of the multi-level MAC");
    cost->add_option("--constants", a.constants, "Gate cost constants file");
    cost->add_option("--normalize", a.normalize, "fp|max55");
    cost->add_option("--dot-length", a.dot_length)->check(CLI::PositiveNumber);
    cost->add_option("--max-levels", a.max_levels)->check(CLI::Range(1, 32));
    cost->add_flag("--multiplier-only-delay", a.multiplier_only, "Exclude the accumulator from the delay");
    cost->add_option("-o,--out", a.out, "Grid CSV (stdout when absent)");
    cost->add_option("--table", a.table, "Reference-config table CSV");

    auto* compare = app.add_subcommand("compare", "FP vs fixed-point vs multi-level accuracy per level pair");
    compare->add_option("--model", a.model)->required();
    compare->add_option("--data", a.data)->required();
    compare->add_option("--seed", a.seed, "Split seed selecting calibration and held-out sets")->required();
    compare->add_option("--train-fraction", a.train_fraction);
    compare->add_option("--pairs", a.pairs, "Comma list of input:weight levels");
    compare->add_option("--calibration-samples", a.calib_samples)->check(CLI::PositiveNumber);
    compare->add_option("--feature-source", a.features, "mean|final");
    compare->add_option("--alpha", a.alpha, "Multi-level scale choice: search (accuracy on the training split) or mse");
    compare->add_option("--tune-samples", a.tune_samples, "Training samples used by --alpha search")
        ->check(CLI::PositiveNumber);
    compare->add_option("--workers", a.workers)->check(CLI::PositiveNumber);
    compare->add_option("-o,--out", a.out, "Output CSV (stdout when absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(ErrorKind::config);
    }

    try {
        if (*synth) return run_synth(a);
        if (*train) return run_train(a);
        if (*quantize) return run_quantize(a);
        if (*eval) return run_eval(a);
        if (*explore_cmd) {
            if (!a.full_data && !a.seed)
                throw Error(ErrorKind::config, "explore needs --seed (held-out split) or --full-data");
            return run_explore(a);
        }
        if (*cost) return run_cost(a);
        if (*compare) return run_compare(a);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
