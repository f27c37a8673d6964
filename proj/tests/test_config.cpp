#include <gtest/gtest.h>

#include "mlbin/config.hpp"
#include "test_util.hpp"

using namespace mlbin;
using mlbin::test::expect_error;

namespace {

const char* full_config =
    "# reference (5,5)\n"
    "x.levels = 5\n"
    "x.alpha_exp = -1\n"
    "wfwd.levels = 5\n"
    "wfwd.alpha_exp = -2\n"
    "wrec.levels = 5\n"
    "wrec.alpha_exp = -3   # trailing comment\n"
    "bias.levels = 5\n"
    "bias.alpha_exp = -1\n";

}  // namespace

TEST(KeyValues, ParsesCommentsAndWhitespace) {
    const auto kv = parse_key_values("  a = 1\n\n# c\n\tb=two words \r\nc = 3 # x\n");
    ASSERT_EQ(kv.size(), 3u);
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "two words");
    EXPECT_EQ(kv.at("c"), "3");
    EXPECT_TRUE(parse_key_values("").empty());
}

TEST(KeyValues, Errors) {
    expect_error(ErrorKind::config, [] { parse_key_values("a = 1\na = 2\n"); });
    expect_error(ErrorKind::config, [] { parse_key_values("just a line\n"); });
    expect_error(ErrorKind::config, [] { parse_key_values("= 3\n"); });
    expect_error(ErrorKind::config, [] { parse_key_values("a =\n"); });
    expect_error(ErrorKind::io, [] { load_key_values("/nonexistent/mlbin.cfg"); });
}

TEST(ScalingConfigText, ParseAndRoundTrip) {
    const auto cfg = scaling_config_from(parse_key_values(full_config));
    EXPECT_EQ(cfg[Group::x], (GroupConfig{5, -1}));
    EXPECT_EQ(cfg[Group::wrec], (GroupConfig{5, -3}));
    EXPECT_EQ(scaling_config_from(parse_key_values(scaling_config_text(cfg))), cfg);
}

TEST(ScalingConfigText, OverridesOnBase) {
    const auto base = scaling_config_from(parse_key_values(full_config));
    const auto cfg = scaling_config_from(parse_key_values("wrec.levels = 2\n"), base);
    EXPECT_EQ(cfg[Group::wrec], (GroupConfig{2, -3}));
    EXPECT_EQ(cfg[Group::x], base[Group::x]);
}

TEST(ScalingConfigText, Errors) {
    expect_error(ErrorKind::config, [] { scaling_config_from(parse_key_values("x.levels = 5\n")); });
    std::string unknown = std::string(full_config) + "y.levels = 2\n";
    expect_error(ErrorKind::config, [&] { scaling_config_from(parse_key_values(unknown)); });
    std::string bad = full_config;
    bad.replace(bad.find("x.levels = 5"), 12, "x.levels = 5.5");
    expect_error(ErrorKind::config, [&] { scaling_config_from(parse_key_values(bad)); });
    std::string range = full_config;
    range.replace(range.find("x.levels = 5"), 12, "x.levels = 40");
    expect_error(ErrorKind::config, [&] { scaling_config_from(parse_key_values(range)); });
}

TEST(ExplorationSpecText, ListsAndOptions) {
    const auto spec = exploration_spec_from(parse_key_values(
        "x.levels = 5\nx.alpha_exp = -1\nwfwd.levels = 5\nwfwd.alpha_exp = 0, -1 ,-2\n"
        "wrec.levels = 4,5\nbias.levels = 5\ntie_break = latest\nfeatures = final\n"));
    EXPECT_EQ(spec[Group::wfwd].alpha_exps, (std::vector<int>{0, -1, -2}));
    EXPECT_EQ(spec[Group::wrec].levels, (std::vector<int>{4, 5}));
    EXPECT_TRUE(spec[Group::wrec].alpha_exps.empty());
    EXPECT_EQ(spec.tie_break, TieBreak::latest);
    EXPECT_EQ(spec.features, FeatureSource::final_hidden);
}

TEST(ExplorationSpecText, Errors) {
    const std::string base = "x.levels = 5\nwfwd.levels = 5\nwrec.levels = 5\n";
    expect_error(ErrorKind::config, [&] { exploration_spec_from(parse_key_values(base)); });
    const std::string full = base + "bias.levels = 5\n";
    expect_error(ErrorKind::config, [&] { exploration_spec_from(parse_key_values(full + "tie_break = first\n")); });
    expect_error(ErrorKind::config, [&] { exploration_spec_from(parse_key_values(full + "x.alpha_exp = 1,,2\n")); });
    expect_error(ErrorKind::config, [&] { exploration_spec_from(parse_key_values(full + "x.scale = 1\n")); });
}

TEST(GateCostText, DefaultsAndOverrides) {
    const auto gc = gate_cost_params_from(parse_key_values("accumulator_guard_bits = 3\nfp_baseline_delay = 100\n"));
    EXPECT_EQ(gc.accumulator_guard_bits, 3);
    EXPECT_EQ(gc.fp_baseline_delay, 100);
    EXPECT_EQ(gc.and_area, GateCostParams{}.and_area);
}
