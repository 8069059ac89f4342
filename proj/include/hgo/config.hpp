#pragma once

// JSON run configuration. Every expression is a string in the expression
// language; errors carry the JSON pointer of the offending field.
//
// {
//   "system":  {"n": 2, "m": 1, "f": [...], "u": [...],
//               "gamma": {"gamma1": "...", "gamma2": "...", "gamma3": "..."} | {"k": 1.0},
//               "strict_triangular": false},
//   "delay":   {"kind": "constant", "tau": 0.25}
//            | {"kind": "varying", "tau_expr": "...", "tau_star": 0.26, "beta": 0.99},
//   "observer": {"L": [-5, -5], "eps": 0.05 | "auto"},
//   "history": {"phi_x": [...], "phi_xhat": [...]},
//   "sim":     {"t_end": 20, "h": 0.001, "seed": 1},
//   "options": {"lyapunov_convention": "as_written" | "transposed",
//               "condi2_variant": "strict" | "paper", "K_bound": 1000,
//               "mode": "auto" | "exponential" | "practical", "eps_max": 1.0, "nu": 0.1}
// }

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hgo/certify.hpp"
#include "hgo/error.hpp"
#include "hgo/expr.hpp"
#include "hgo/linalg.hpp"
#include "hgo/model.hpp"

namespace hgo {

struct RunConfig {
    TriangularSystem system;
    DelayModel delay;
    std::vector<double> gain;
    std::optional<double> eps; ///< nullopt selects the recommended eps
    HistorySpec history;
    double t_end = 20.0;
    double h = 1e-3;
    std::uint64_t seed = 1;
    LyapunovConvention convention = LyapunovConvention::AsWritten;
    Condition2Variant variant = Condition2Variant::Strict;
    double k_bound = 1e3;
    StabilityMode mode = StabilityMode::Practical;
    double eps_max = 1.0;
    std::optional<double> nu;
};

namespace detail {

using nlohmann::json;

class ConfigReader {
public:
    [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
        throw ConfigError("config error at " + (path.empty() ? std::string("/") : path) + ": " + msg);
    }

    static const json& field(const json& obj, const std::string& path, const char* key) {
        if (!obj.is_object()) fail(path, "expected an object");
        auto it = obj.find(key);
        if (it == obj.end()) fail(path + "/" + key, "missing required field");
        return *it;
    }

    static const json* optional_field(const json& obj, const std::string& path, const char* key) {
        if (!obj.is_object()) fail(path, "expected an object");
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    static double number(const json& v, const std::string& path) {
        if (!v.is_number()) fail(path, "expected a number");
        return v.get<double>();
    }

    static std::size_t count(const json& v, const std::string& path) {
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(path, "expected a non-negative integer");
        return v.get<std::size_t>();
    }

    static std::string string(const json& v, const std::string& path) {
        if (!v.is_string()) fail(path, "expected a string");
        return v.get<std::string>();
    }

    static Expression expression(const json& v, const std::string& path) {
        try {
            return parse_expression(string(v, path));
        } catch (const ParseError& e) {
            fail(path, e.what());
        }
    }

    static std::vector<Expression> expressions(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array of expression strings");
        std::vector<Expression> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expression(v[i], path + "/" + std::to_string(i)));
        return out;
    }

    static std::vector<double> numbers(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "/" + std::to_string(i)));
        return out;
    }
};

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& root) {
    using R = detail::ConfigReader;
    RunConfig cfg;

    const auto& sys = R::field(root, "", "system");
    cfg.system.n = R::count(R::field(sys, "/system", "n"), "/system/n");
    cfg.system.m = R::count(R::field(sys, "/system", "m"), "/system/m");
    if (cfg.system.n == 0) R::fail("/system/n", "must be at least 1");
    cfg.system.f = R::expressions(R::field(sys, "/system", "f"), "/system/f");
    cfg.system.u = R::expressions(R::field(sys, "/system", "u"), "/system/u");
    if (cfg.system.f.size() != cfg.system.n) R::fail("/system/f", "expected n entries");
    if (cfg.system.u.size() != cfg.system.m) R::fail("/system/u", "expected m entries");
    if (const auto* st = R::optional_field(sys, "/system", "strict_triangular")) {
        if (!st->is_boolean()) R::fail("/system/strict_triangular", "expected a boolean");
        cfg.system.strict_triangular = st->get<bool>();
    }
    const auto& gamma = R::field(sys, "/system", "gamma");
    if (const auto* k = R::optional_field(gamma, "/system/gamma", "k")) {
        double kv = R::number(*k, "/system/gamma/k");
        if (kv < 0.0) R::fail("/system/gamma/k", "Lipschitz constant must be non-negative");
        cfg.system.gamma = GammaSpec::lipschitz(kv);
    } else {
        GammaSpec::Formulas f;
        const char* keys[3] = {"gamma1", "gamma2", "gamma3"};
        for (int i = 0; i < 3; ++i)
            f.gamma[i] = R::expression(R::field(gamma, "/system/gamma", keys[i]), std::string("/system/gamma/") + keys[i]);
        cfg.system.gamma.form = f;
    }

    const auto& delay = R::field(root, "", "delay");
    const std::string kind = R::string(R::field(delay, "/delay", "kind"), "/delay/kind");
    if (kind == "constant") {
        cfg.delay = DelayModel::constant(R::number(R::field(delay, "/delay", "tau"), "/delay/tau"));
    } else if (kind == "varying") {
        auto expr = R::expression(R::field(delay, "/delay", "tau_expr"), "/delay/tau_expr");
        double tau_star = R::number(R::field(delay, "/delay", "tau_star"), "/delay/tau_star");
        double beta = R::number(R::field(delay, "/delay", "beta"), "/delay/beta");
        try {
            cfg.delay = DelayModel::varying(std::move(expr), tau_star, beta);
        } catch (const EvalError& e) {
            R::fail("/delay/tau_expr", e.what());
        }
    } else {
        R::fail("/delay/kind", "expected \"constant\" or \"varying\"");
    }

    const auto& obs = R::field(root, "", "observer");
    cfg.gain = R::numbers(R::field(obs, "/observer", "L"), "/observer/L");
    if (cfg.gain.size() != cfg.system.n) R::fail("/observer/L", "expected n entries");
    const auto& eps = R::field(obs, "/observer", "eps");
    if (eps.is_string() && eps.get<std::string>() == "auto") {
        cfg.eps = std::nullopt;
    } else {
        cfg.eps = R::number(eps, "/observer/eps");
        if (!(*cfg.eps > 0.0)) R::fail("/observer/eps", "must be positive");
    }

    const auto& hist = R::field(root, "", "history");
    cfg.history.phi_x = R::expressions(R::field(hist, "/history", "phi_x"), "/history/phi_x");
    cfg.history.phi_xhat = R::expressions(R::field(hist, "/history", "phi_xhat"), "/history/phi_xhat");
    if (cfg.history.phi_x.size() != cfg.system.n) R::fail("/history/phi_x", "expected n entries");
    if (cfg.history.phi_xhat.size() != cfg.system.n) R::fail("/history/phi_xhat", "expected n entries");

    if (const auto* sim = R::optional_field(root, "", "sim")) {
        if (const auto* v = R::optional_field(*sim, "/sim", "t_end")) cfg.t_end = R::number(*v, "/sim/t_end");
        if (const auto* v = R::optional_field(*sim, "/sim", "h")) cfg.h = R::number(*v, "/sim/h");
        if (const auto* v = R::optional_field(*sim, "/sim", "seed")) cfg.seed = R::count(*v, "/sim/seed");
        if (cfg.t_end < 0.0) R::fail("/sim/t_end", "must be non-negative");
        if (!(cfg.h > 0.0)) R::fail("/sim/h", "must be positive");
    }

    cfg.mode = cfg.delay.kind() == DelayKind::Constant ? StabilityMode::Exponential : StabilityMode::Practical;
    if (const auto* opt = R::optional_field(root, "", "options")) {
        if (const auto* v = R::optional_field(*opt, "/options", "lyapunov_convention")) {
            auto s = R::string(*v, "/options/lyapunov_convention");
            if (s == "as_written") cfg.convention = LyapunovConvention::AsWritten;
            else if (s == "transposed") cfg.convention = LyapunovConvention::Transposed;
            else R::fail("/options/lyapunov_convention", "expected \"as_written\" or \"transposed\"");
        }
        if (const auto* v = R::optional_field(*opt, "/options", "condi2_variant")) {
            auto s = R::string(*v, "/options/condi2_variant");
            if (s == "strict") cfg.variant = Condition2Variant::Strict;
            else if (s == "paper") cfg.variant = Condition2Variant::Paper;
            else R::fail("/options/condi2_variant", "expected \"strict\" or \"paper\"");
        }
        if (const auto* v = R::optional_field(*opt, "/options", "K_bound")) {
            cfg.k_bound = R::number(*v, "/options/K_bound");
            if (!(cfg.k_bound > 0.0)) R::fail("/options/K_bound", "must be positive");
        }
        if (const auto* v = R::optional_field(*opt, "/options", "mode")) {
            auto s = R::string(*v, "/options/mode");
            if (s == "exponential") cfg.mode = StabilityMode::Exponential;
            else if (s == "practical") cfg.mode = StabilityMode::Practical;
            else if (s != "auto") R::fail("/options/mode", "expected \"auto\", \"exponential\" or \"practical\"");
        }
        if (const auto* v = R::optional_field(*opt, "/options", "eps_max")) {
            cfg.eps_max = R::number(*v, "/options/eps_max");
            if (!(cfg.eps_max > 1e-6)) R::fail("/options/eps_max", "must exceed 1e-6");
        }
        if (const auto* v = R::optional_field(*opt, "/options", "nu")) {
            cfg.nu = R::number(*v, "/options/nu");
            if (*cfg.nu < 0.0) R::fail("/options/nu", "must be non-negative");
        }
    }
    if (cfg.mode == StabilityMode::Exponential && cfg.delay.kind() != DelayKind::Constant)
        R::fail("/options/mode", "exponential mode requires a constant delay");
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config error at /: malformed JSON: ") + e.what());
    }
    return parse_config(root);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config error: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// The polar-molecule orientation model with delayed state and input.
inline constexpr const char* kPolarMoleculeConfig = R"json({
  "system": {
    "n": 2,
    "m": 1,
    "f": ["sin(xd2)/12 + x1*cos(ud1)/24", "xd2/12 + x2/24 + ud1"],
    "u": ["cos(7*t)"],
    "gamma": {"gamma1": "(1+eps)/24", "gamma2": "(1+eps)/12", "gamma3": "1+eps"}
  },
  "delay": {"kind": "varying", "tau_expr": "0.25+0.01*cos(t)^2", "tau_star": 0.26, "beta": 0.99},
  "observer": {"L": [-5, -5], "eps": 0.05},
  "history": {"phi_x": ["-2", "1"], "phi_xhat": ["2", "2"]},
  "sim": {"t_end": 20, "h": 0.001, "seed": 1},
  "options": {"lyapunov_convention": "as_written", "condi2_variant": "strict", "K_bound": 1000, "mode": "auto",
              "eps_max": 1.0}
}
)json";

inline RunConfig polar_molecule_config() { return parse_config_text(kPolarMoleculeConfig); }

} // namespace hgo
