#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hgo/pipeline.hpp"

using namespace hgo;
using nlohmann::json;

namespace {

json base() { return json::parse(kPolarMoleculeConfig); }

std::string error_of(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

} // namespace

TEST(Config, ShippedFileMatchesBuiltin) {
    std::ifstream in(std::string(HGO_DATA_DIR) + "/polar_molecule.json");
    ASSERT_TRUE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(json::parse(ss.str()), base());
}

TEST(Config, BuiltinFields) {
    const auto cfg = polar_molecule_config();
    EXPECT_EQ(cfg.system.n, 2u);
    EXPECT_EQ(cfg.system.m, 1u);
    EXPECT_EQ(cfg.gain, (std::vector<double>{-5, -5}));
    ASSERT_TRUE(cfg.eps.has_value());
    EXPECT_EQ(*cfg.eps, 0.05);
    EXPECT_EQ(cfg.delay.kind(), DelayKind::Varying);
    EXPECT_EQ(cfg.delay.tau_star(), 0.26);
    EXPECT_EQ(cfg.mode, StabilityMode::Practical);
    EXPECT_EQ(cfg.convention, LyapunovConvention::AsWritten);
    EXPECT_EQ(cfg.variant, Condition2Variant::Strict);
    EXPECT_EQ(cfg.t_end, 20.0);
    EXPECT_EQ(cfg.h, 1e-3);
    EXPECT_FALSE(cfg.nu.has_value());
}

TEST(Config, AutoEpsAndOptions) {
    auto j = base();
    j["observer"]["eps"] = "auto";
    j["options"]["nu"] = 0.2;
    j["options"]["lyapunov_convention"] = "transposed";
    j["options"]["condi2_variant"] = "paper";
    const auto cfg = parse_config(j);
    EXPECT_FALSE(cfg.eps.has_value());
    EXPECT_EQ(cfg.nu, 0.2);
    EXPECT_EQ(cfg.convention, LyapunovConvention::Transposed);
    EXPECT_EQ(cfg.variant, Condition2Variant::Paper);
}

TEST(Config, ModeFollowsDelayUnlessOverridden) {
    auto j = base();
    j["delay"] = {{"kind", "constant"}, {"tau", 0.25}};
    EXPECT_EQ(parse_config(j).mode, StabilityMode::Exponential);
    j["options"]["mode"] = "practical";
    EXPECT_EQ(parse_config(j).mode, StabilityMode::Practical);

    auto v = base();
    v["options"]["mode"] = "exponential";
    EXPECT_TRUE(starts_with(error_of(v), "config error at /options/mode:"));
}

TEST(Config, ErrorsCarryJsonPointer) {
    struct Case {
        std::string pointer;
        std::string expected_prefix;
        json value;
    };
    const Case cases[] = {
        {"/system/f/0", "config error at /system/f/0:", "sin(("},
        {"/system/n", "config error at /system/n:", -1},
        {"/observer/L", "config error at /observer/L:", json::array({-5})},
        {"/observer/L/1", "config error at /observer/L/1:", "x"},
        {"/observer/eps", "config error at /observer/eps:", 0.0},
        {"/delay/kind", "config error at /delay/kind:", "sometimes"},
        {"/history/phi_x", "config error at /history/phi_x:", json::array({"1"})},
        {"/sim/h", "config error at /sim/h:", -0.1},
        {"/options/K_bound", "config error at /options/K_bound:", 0},
        {"/system/gamma/k", "config error at /system/gamma/k:", -1.0},
    };
    for (const auto& c : cases) {
        auto j = base();
        if (c.pointer == "/system/gamma/k") j["system"]["gamma"] = json::object();
        j[json::json_pointer(c.pointer)] = c.value;
        const auto msg = error_of(j);
        EXPECT_TRUE(starts_with(msg, c.expected_prefix)) << c.pointer << " -> " << msg;
    }
}

TEST(Config, MissingFieldsAndMalformedText) {
    auto j = base();
    j.erase("history");
    EXPECT_EQ(error_of(j), "config error at /history: missing required field");
    auto k = base();
    k["system"].erase("gamma");
    EXPECT_EQ(error_of(k), "config error at /system/gamma: missing required field");
    EXPECT_THROW(parse_config_text("{\"system\": "), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, LipschitzGammaForm) {
    auto j = base();
    j["system"]["gamma"] = {{"k", 2.0}};
    const auto cfg = parse_config(j);
    const auto g = gamma_eval(cfg.system.gamma, 0.05, 2);
    const double expected = 2.0 * geometric_weight_sum(0.05, 2);
    EXPECT_EQ(g.gamma1, expected);
    EXPECT_EQ(g.gamma2, expected);
    EXPECT_EQ(g.gamma3, expected);
}
