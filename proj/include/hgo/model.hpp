#pragma once

// System class x' = A x + f(x, x(t - tau(t)), u, u(t - tau(t))), y = x1, with
// its delay model, history functions and the weighted incremental bounds
// gamma_1..gamma_3 on f.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hgo/error.hpp"
#include "hgo/expr.hpp"

namespace hgo {

/// gamma_1..gamma_3 either as formulas in `eps` or from a Lipschitz constant k,
/// in which case all three equal k (1 + eps + ... + eps^{n-1}).
struct GammaSpec {
    struct Formulas {
        std::array<Expression, 3> gamma;
    };
    struct Lipschitz {
        double k = 0.0;
    };
    std::variant<Formulas, Lipschitz> form = Lipschitz{};

    static GammaSpec formulas(std::string_view g1, std::string_view g2, std::string_view g3) {
        return {Formulas{{parse_expression(g1), parse_expression(g2), parse_expression(g3)}}};
    }
    static GammaSpec lipschitz(double k) { return {Lipschitz{k}}; }

    bool automatic() const { return std::holds_alternative<Lipschitz>(form); }
};

struct GammaValues {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
};

/// 1 + eps + ... + eps^{n-1}
inline double geometric_weight_sum(double eps, std::size_t n) {
    double sum = 0.0, term = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += term;
        term *= eps;
    }
    return sum;
}

inline GammaValues gamma_eval(const GammaSpec& spec, double eps, std::size_t n) {
    if (!(eps > 0.0)) throw Error("gamma evaluation requires eps > 0");
    GammaValues g;
    if (const auto* lip = std::get_if<GammaSpec::Lipschitz>(&spec.form)) {
        double v = lip->k * geometric_weight_sum(eps, n);
        g = {v, v, v};
    } else {
        const auto& f = std::get<GammaSpec::Formulas>(spec.form);
        Environment env{{"eps", eps}};
        g = {evaluate(f.gamma[0], env), evaluate(f.gamma[1], env), evaluate(f.gamma[2], env)};
    }
    const double values[3] = {g.gamma1, g.gamma2, g.gamma3};
    for (int i = 0; i < 3; ++i)
        if (!(values[i] > 0.0))
            throw Error("gamma_" + std::to_string(i + 1) + "(eps) must be positive, got " +
                        std::to_string(values[i]));
    return g;
}

struct TriangularSystem {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<Expression> f; ///< n formulas over t, x_i, xd_i, u_j, ud_j
    std::vector<Expression> u; ///< m formulas in t
    GammaSpec gamma;
    bool strict_triangular = false;
};

enum class DelayKind { Constant, Varying };

/// Constant delay tau, or a time-varying tau(t) with 0 <= tau(t) <= tau_star
/// and tau'(t) <= 1 - beta.
class DelayModel {
public:
    static DelayModel constant(double tau) {
        DelayModel d;
        d.kind_ = DelayKind::Constant;
        d.tau_ = tau;
        d.tau_star_ = tau;
        d.beta_ = 1.0;
        return d;
    }

    static DelayModel varying(Expression tau_expr, double tau_star, double beta) {
        DelayModel d;
        d.kind_ = DelayKind::Varying;
        d.expr_ = std::move(tau_expr);
        static const std::string slot = "t";
        d.compiled_ = CompiledExpression(d.expr_, std::span(&slot, 1));
        d.tau_star_ = tau_star;
        d.beta_ = beta;
        return d;
    }

    DelayKind kind() const { return kind_; }
    double tau() const { return tau_; }
    double tau_star() const { return tau_star_; }
    double beta() const { return beta_; }
    const Expression& tau_expression() const { return expr_; }

    /// tau(t); equal to tau for a constant delay.
    double at(double t) const {
        if (kind_ == DelayKind::Constant) return tau_;
        return compiled_(std::span(&t, 1));
    }

    /// tau for a constant delay, tau_star for a varying one.
    double upper_bound() const { return tau_star_; }

private:
    DelayKind kind_ = DelayKind::Constant;
    double tau_ = 0.0;
    double tau_star_ = 0.0;
    double beta_ = 1.0;
    Expression expr_;
    CompiledExpression compiled_;
};

/// Pre-initial functions on s in [-tau_star, 0] for the plant and the observer.
struct HistorySpec {
    std::vector<Expression> phi_x;
    std::vector<Expression> phi_xhat;
};

/// Slot order used when compiling the nonlinearity: t, x1..xn, xd1..xdn, u1..um, ud1..udm.
inline std::vector<std::string> system_slots(std::size_t n, std::size_t m) {
    std::vector<std::string> slots{"t"};
    for (std::size_t i = 1; i <= n; ++i) slots.push_back("x" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i) slots.push_back("xd" + std::to_string(i));
    for (std::size_t j = 1; j <= m; ++j) slots.push_back("u" + std::to_string(j));
    for (std::size_t j = 1; j <= m; ++j) slots.push_back("ud" + std::to_string(j));
    return slots;
}

/// f and u lowered to slot programs for repeated evaluation.
class CompiledSystem {
public:
    explicit CompiledSystem(const TriangularSystem& sys) : n_(sys.n), m_(sys.m), slots_(1 + 2 * n_ + 2 * m_, 0.0) {
        auto names = system_slots(n_, m_);
        for (const auto& fi : sys.f) f_.emplace_back(fi, names);
        static const std::string t = "t";
        for (const auto& uj : sys.u) u_.emplace_back(uj, std::span(&t, 1));
    }

    std::size_t n() const { return n_; }
    std::size_t m() const { return m_; }

    void input(double t, std::span<double> out) const {
        for (std::size_t j = 0; j < m_; ++j) out[j] = u_[j](std::span(&t, 1));
    }

    /// out[i] = f_i(t, x, xd, u, ud). Not thread-safe (reuses a scratch buffer).
    void nonlinearity(double t, std::span<const double> x, std::span<const double> xd, std::span<const double> u,
                      std::span<const double> ud, std::span<double> out) {
        slots_[0] = t;
        std::copy(x.begin(), x.end(), slots_.begin() + 1);
        std::copy(xd.begin(), xd.end(), slots_.begin() + 1 + n_);
        std::copy(u.begin(), u.end(), slots_.begin() + 1 + 2 * n_);
        std::copy(ud.begin(), ud.end(), slots_.begin() + 1 + 2 * n_ + m_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = f_[i](slots_);
    }

private:
    std::size_t n_, m_;
    std::vector<CompiledExpression> f_;
    std::vector<CompiledExpression> u_;
    std::vector<double> slots_;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

struct DelayCheckGrid {
    double t_end = 100.0;
    double step = 1e-3;
    /// Slack allowed on sampled bounds (central differences overshoot smooth maxima).
    double tolerance = 1e-6;
};

namespace detail {

inline std::set<std::string> vocabulary(std::size_t n_states, std::size_t m) {
    std::set<std::string> v{"t"};
    for (std::size_t i = 1; i <= n_states; ++i) {
        v.insert("x" + std::to_string(i));
        v.insert("xd" + std::to_string(i));
    }
    for (std::size_t j = 1; j <= m; ++j) {
        v.insert("u" + std::to_string(j));
        v.insert("ud" + std::to_string(j));
    }
    return v;
}

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

/// True when f_i only reads x1..xi, xd1..xdi, inputs and t.
inline bool is_strictly_triangular(const TriangularSystem& sys, std::size_t i) {
    auto allowed = detail::vocabulary(i + 1, sys.m);
    for (const auto& v : free_variables(sys.f[i]))
        if (!allowed.contains(v)) return false;
    return true;
}

inline void validate_delay(const DelayModel& delay, const DelayCheckGrid& grid, ValidationReport& report) {
    if (delay.kind() == DelayKind::Constant) {
        if (!(delay.tau() > 0.0)) report.violations.push_back("τ must be positive, got " + detail::format_value(delay.tau()));
        return;
    }
    const double tau_star = delay.tau_star();
    const double beta = delay.beta();
    if (!(tau_star > 0.0)) report.violations.push_back("τ* must be positive, got " + detail::format_value(tau_star));
    if (!(beta > 0.0 && beta <= 1.0)) report.violations.push_back("β out of (0,1]: " + detail::format_value(beta));
    for (const auto& v : free_variables(delay.tau_expression()))
        if (v != "t") {
            report.violations.push_back("τ(t) may only depend on t, found '" + v + "'");
            return;
        }

    const auto steps = static_cast<std::size_t>(std::llround(grid.t_end / grid.step));
    double min_tau = INFINITY, max_tau = -INFINITY, max_rate = -INFINITY;
    double t_min = 0.0, t_max = 0.0, t_rate = 0.0;
    try {
        for (std::size_t k = 0; k <= steps; ++k) {
            double t = static_cast<double>(k) * grid.step;
            double v = delay.at(t);
            if (v < min_tau) min_tau = v, t_min = t;
            if (v > max_tau) max_tau = v, t_max = t;
            double rate = (delay.at(t + grid.step) - delay.at(t - grid.step)) / (2.0 * grid.step);
            if (rate > max_rate) max_rate = rate, t_rate = t;
        }
    } catch (const Error& e) {
        report.violations.push_back(std::string("τ(t) evaluation failed: ") + e.what());
        return;
    }
    if (min_tau < 0.0)
        report.violations.push_back("τ(t) < 0 at t=" + detail::format_value(t_min) + " (" +
                                    detail::format_value(min_tau) + ")");
    if (max_tau > tau_star + grid.tolerance)
        report.violations.push_back("τ(t) exceeds τ* at t=" + detail::format_value(t_max) + " (" +
                                    detail::format_value(max_tau) + ")");
    if (max_rate > 1.0 - beta + grid.tolerance)
        report.violations.push_back("dτ/dt exceeds 1-β at t=" + detail::format_value(t_rate) + " (" +
                                    detail::format_value(max_rate) + ")");
}

/// Lists every violated structural assumption; empty means valid.
inline ValidationReport validate_system(const TriangularSystem& sys, const DelayModel& delay,
                                        const DelayCheckGrid& grid = {}) {
    ValidationReport report;
    auto& out = report.violations;
    if (sys.n == 0) out.push_back("state dimension n must be at least 1");
    if (sys.f.size() != sys.n)
        out.push_back("f has " + std::to_string(sys.f.size()) + " components, expected n=" + std::to_string(sys.n));
    if (sys.u.size() != sys.m)
        out.push_back("u has " + std::to_string(sys.u.size()) + " components, expected m=" + std::to_string(sys.m));

    const auto vocab = detail::vocabulary(sys.n, sys.m);
    Environment zero;
    for (const auto& name : vocab) zero[name] = 0.0;

    for (std::size_t i = 0; i < sys.f.size(); ++i) {
        const std::string label = "f_" + std::to_string(i + 1);
        bool vocab_ok = true;
        for (const auto& v : free_variables(sys.f[i]))
            if (!vocab.contains(v)) {
                out.push_back(label + ": variable '" + v + "' outside the state/input vocabulary");
                vocab_ok = false;
            }
        if (!vocab_ok) continue;
        try {
            double v = evaluate(sys.f[i], zero);
            if (v != 0.0) out.push_back(label + "(0,0,0,0) ≠ 0 (value " + detail::format_value(v) + ")");
        } catch (const Error& e) {
            out.push_back(label + ": evaluation failed: " + e.what());
        }
        if (sys.strict_triangular && !is_strictly_triangular(sys, i))
            out.push_back(label + " is not strictly triangular");
    }

    for (std::size_t j = 0; j < sys.u.size(); ++j)
        for (const auto& v : free_variables(sys.u[j]))
            if (v != "t") out.push_back("u_" + std::to_string(j + 1) + " may only depend on t, found '" + v + "'");

    for (double eps : {0.01, 0.1, 1.0}) {
        try {
            gamma_eval(sys.gamma, eps, sys.n);
        } catch (const Error& e) {
            out.push_back("gamma at eps=" + detail::format_value(eps) + ": " + e.what());
        }
    }

    validate_delay(delay, grid, report);
    return report;
}

/// Checks that both history vectors have n components evaluable on [-window, 0].
inline ValidationReport validate_history(const HistorySpec& history, std::size_t n, double window) {
    ValidationReport report;
    auto check = [&](const std::vector<Expression>& phi, const std::string& label) {
        if (phi.size() != n) {
            report.violations.push_back(label + " has " + std::to_string(phi.size()) + " components, expected " +
                                        std::to_string(n));
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& v : free_variables(phi[i]))
                if (v != "s") {
                    report.violations.push_back(label + "[" + std::to_string(i + 1) +
                                                "] may only depend on s, found '" + v + "'");
                    return;
                }
            try {
                for (int k = 0; k <= 100; ++k) evaluate(phi[i], {{"s", -window * k / 100.0}});
            } catch (const Error& e) {
                report.violations.push_back(label + "[" + std::to_string(i + 1) + "]: " + e.what());
            }
        }
    };
    check(history.phi_x, "phi_x");
    check(history.phi_xhat, "phi_xhat");
    return report;
}

/// One argument tuple for the two weighted incremental inequalities:
///   first  compares f(x, xbar, u, ud) with f(y, ybar, u, ud)
///   second compares f(x, xbar, u, ud) with f(x, ybar, u, ud_bar)
struct A1Sample {
    double t = 0.0;
    std::vector<double> x, xbar, y, ybar;
    std::vector<double> u, ud, ud_bar;
};

struct A1Slack {
    double first = 0.0;  ///< right side minus left side of the first inequality
    double second = 0.0; ///< same for the second inequality
};

inline A1Slack a1_slack(CompiledSystem& sys, const GammaValues& g, double eps, const A1Sample& s) {
    const std::size_t n = sys.n();
    std::vector<double> fa(n), fb(n), fc(n);
    sys.nonlinearity(s.t, s.x, s.xbar, s.u, s.ud, fa);
    sys.nonlinearity(s.t, s.y, s.ybar, s.u, s.ud, fb);
    sys.nonlinearity(s.t, s.x, s.ybar, s.u, s.ud_bar, fc);

    double lhs1 = 0.0, lhs2 = 0.0, dx = 0.0, dxbar = 0.0, weights = 0.0, w = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        lhs1 += w * std::fabs(fa[i] - fb[i]);
        lhs2 += w * std::fabs(fa[i] - fc[i]);
        dx += w * std::fabs(s.x[i] - s.y[i]);
        dxbar += w * std::fabs(s.xbar[i] - s.ybar[i]);
        weights += w;
        w *= eps;
    }
    double du = 0.0;
    for (std::size_t j = 0; j < s.ud.size(); ++j) du += (s.ud[j] - s.ud_bar[j]) * (s.ud[j] - s.ud_bar[j]);
    du = std::sqrt(du);

    return {g.gamma1 * dx + g.gamma2 * dxbar - lhs1, g.gamma2 * dxbar + g.gamma3 * weights * du - lhs2};
}

struct A1SampleOptions {
    std::size_t trials = 10000;
    double radius = 5.0;
    std::uint64_t seed = 1;
};

struct A1SampleReport {
    std::size_t trials = 0;
    double min_slack_first = INFINITY;
    double min_slack_second = INFINITY;
    A1Sample worst; ///< sample attaining the overall minimum

    double min_slack() const { return std::min(min_slack_first, min_slack_second); }
    /// Negative slack means the declared gammas are contradicted by a sample.
    bool falsified() const { return min_slack() < 0.0; }
    std::string summary() const {
        return falsified() ? "falsified on " + std::to_string(trials) + " samples (min slack " +
                                 detail::format_value(min_slack()) + ")"
                           : "not falsified on " + std::to_string(trials) + " samples";
    }
};

/// Draws argument tuples uniformly from [-radius, radius] (t from [0, radius])
/// and records the smallest slack of both inequalities.
inline A1SampleReport check_a1_samples(const TriangularSystem& sys, double eps, const A1SampleOptions& opts = {}) {
    const GammaValues g = gamma_eval(sys.gamma, eps, sys.n);
    CompiledSystem compiled(sys);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> box(-opts.radius, opts.radius);
    std::uniform_real_distribution<double> time(0.0, opts.radius);

    auto draw = [&](std::size_t k) {
        std::vector<double> v(k);
        for (auto& e : v) e = box(rng);
        return v;
    };

    A1SampleReport report;
    report.trials = opts.trials;
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        A1Sample s;
        s.t = time(rng);
        s.x = draw(sys.n);
        s.xbar = draw(sys.n);
        s.y = draw(sys.n);
        s.ybar = draw(sys.n);
        s.u = draw(sys.m);
        s.ud = draw(sys.m);
        s.ud_bar = draw(sys.m);
        auto slack = a1_slack(compiled, g, eps, s);
        if (std::min(slack.first, slack.second) < report.min_slack()) report.worst = s;
        report.min_slack_first = std::min(report.min_slack_first, slack.first);
        report.min_slack_second = std::min(report.min_slack_second, slack.second);
    }
    return report;
}

} // namespace hgo
