#pragma once

// End-to-end flows driven by a RunConfig: certification, co-simulation with
// envelope checking, and the JSON / CSV writers used by the command line tool.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"

#include "hgo/certify.hpp"
#include "hgo/config.hpp"
#include "hgo/harness.hpp"
#include "hgo/linalg.hpp"
#include "hgo/model.hpp"

namespace hgo {

inline const char* to_string(StabilityMode m) { return m == StabilityMode::Exponential ? "EXPONENTIAL" : "PRACTICAL"; }
inline const char* to_string(LyapunovConvention c) {
    return c == LyapunovConvention::AsWritten ? "AS_WRITTEN" : "TRANSPOSED";
}
inline const char* to_string(Condition2Variant v) { return v == Condition2Variant::Strict ? "STRICT" : "PAPER"; }

inline FeasibilityProblem feasibility_problem(const RunConfig& cfg, const LyapunovSolution& lyap) {
    return {lyap.lambda_min, lyap.lambda_max, cfg.system.n, cfg.system.gamma, cfg.mode, cfg.delay.beta(), cfg.variant};
}

/// Throws ConfigError listing every violated assumption of the configured model.
inline void require_valid(const RunConfig& cfg) {
    auto report = validate_system(cfg.system, cfg.delay);
    auto hist = validate_history(cfg.history, cfg.system.n, cfg.delay.upper_bound());
    report.violations.insert(report.violations.end(), hist.violations.begin(), hist.violations.end());
    if (!report.ok()) {
        std::string msg = "config error: invalid model:";
        for (const auto& v : report.violations) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
}

/// Routh test on A + L C, then the Lyapunov solve in the configured convention.
inline LyapunovSolution design_lyapunov(std::span<const double> gain, LyapunovConvention convention) {
    if (!is_hurwitz(companion_char_poly(gain))) throw InfeasibleError("A_L not Hurwitz");
    return solve_lyapunov(observer_error_matrix(gain), convention);
}

inline SimulationResult run_simulation(const RunConfig& cfg, double eps) {
    SimulationOptions opts;
    opts.t0 = 0.0;
    opts.t_end = cfg.t_end;
    opts.h = cfg.h;
    opts.mode = cfg.mode;
    opts.k_bound = cfg.k_bound;
    return simulate_plant_observer(cfg.system, cfg.delay, ObserverSpec{cfg.gain, eps}, cfg.history, opts);
}

struct CertificationOutcome {
    LyapunovSolution lyapunov;
    EpsilonRange range;
    StabilityCertificate certificate;
    std::optional<NuEstimate> nu_estimate;
    std::string nu_source; ///< "user", "estimated" or empty (exponential mode)
    std::optional<SimulationResult> simulation; ///< run used to estimate nu
};

inline CertificationOutcome certify_config(const RunConfig& cfg) {
    require_valid(cfg);
    CertificationOutcome out;
    out.lyapunov = design_lyapunov(cfg.gain, cfg.convention);
    out.range = find_epsilon_range(feasibility_problem(cfg, out.lyapunov), cfg.eps_max, 1e-6);
    const double eps = cfg.eps.value_or(out.range.recommended_eps);
    const double tau_bound = cfg.delay.upper_bound();

    CertificationRequest req;
    req.lyapunov = out.lyapunov;
    req.n = cfg.system.n;
    req.gamma = cfg.system.gamma;
    req.mode = cfg.mode;
    req.tau = tau_bound;
    req.beta = cfg.delay.beta();
    req.variant = cfg.variant;
    req.eps = eps;
    req.sup_eta0 = history_sup_eta(cfg.history, eps, tau_bound, cfg.h);

    if (cfg.mode == StabilityMode::Practical) {
        if (cfg.nu) {
            req.nu = *cfg.nu;
            out.nu_source = "user";
        } else {
            // The condition is checked first so infeasible configs fail fast.
            const auto g = gamma_eval(cfg.system.gamma, eps, cfg.system.n);
            const double lhs = condition2_lhs(out.lyapunov.lambda_min, out.lyapunov.lambda_max, cfg.system.n,
                                              g.gamma1, g.gamma2, eps, cfg.delay.beta(), cfg.variant);
            if (!(lhs > 0.0)) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "condition LHS negative at eps=%.6g (%.6g)", eps, lhs);
                throw InfeasibleError(buf);
            }
            out.simulation = run_simulation(cfg, eps);
            if (const auto& f = out.simulation->trajectory.failure()) throw IntegrationError(*f);
            out.nu_estimate = estimate_nu(*out.simulation, cfg.system, cfg.delay, 0.0, cfg.t_end);
            req.nu = out.nu_estimate->nu;
            out.nu_source = "estimated";
        }
    }
    out.certificate = certify(req);
    return out;
}

struct SimulationOutcome {
    std::optional<CertificationOutcome> certification; ///< absent only for forced infeasible runs
    SimulationResult result;
    std::optional<EnvelopeReport> envelope;
};

/// Certifies (unless `force` and infeasible), simulates and checks the envelope.
/// Integration failures are reported through result.trajectory.failure().
inline SimulationOutcome simulate_config(const RunConfig& cfg, bool force = false) {
    std::optional<CertificationOutcome> cert;
    try {
        cert = certify_config(cfg);
    } catch (const InfeasibleError&) {
        if (!force || !cfg.eps) throw;
    } catch (const IntegrationError&) {
        if (!force || !cfg.eps) throw;
    }
    const double eps = cert ? cert->certificate.eps : *cfg.eps;
    SimulationResult result = cert && cert->simulation ? std::move(*cert->simulation) : run_simulation(cfg, eps);
    if (cert) cert->simulation.reset();

    SimulationOutcome out{std::move(cert), std::move(result), std::nullopt};
    if (out.certification) {
        out.envelope = check_envelope(out.result, out.certification->certificate);
        attach_envelope(out.result, *out.envelope);
    }
    return out;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json certificate_to_json(const StabilityCertificate& c) {
    nlohmann::json j;
    j["mode"] = to_string(c.mode);
    j["eps"] = c.eps;
    j["P"] = matrix_to_json(c.P);
    j["lambda_min"] = c.lambda_min;
    j["lambda_max"] = c.lambda_max;
    j["sigma"] = c.sigma;
    j["a"] = c.a;
    j["b"] = c.b;
    j["c"] = c.c;
    j["envelope_coef"] = c.envelope_coef;
    j["envelope_rate"] = c.envelope_rate;
    if (c.mode == StabilityMode::Practical) {
        j["theta"] = c.theta;
        j["radius"] = c.radius;
        j["nu"] = c.nu;
    }
    j["condition_lhs"] = c.condition_lhs;
    j["gamma"] = {c.gamma.gamma1, c.gamma.gamma2, c.gamma.gamma3};
    j["tau"] = c.tau;
    j["beta"] = c.beta;
    j["condi2_variant"] = to_string(c.variant);
    j["sup_eta0"] = c.sup_eta0;
    j["envelope_coef_printed"] = c.envelope_coef_printed;
    if (c.mode == StabilityMode::Practical) j["radius_printed"] = c.radius_printed;
    return j;
}

inline nlohmann::json certification_to_json(const CertificationOutcome& o) {
    auto j = certificate_to_json(o.certificate);
    j["feasible"] = true;
    j["lyapunov_convention"] = to_string(o.lyapunov.convention);
    j["lyapunov_residual"] = o.lyapunov.residual;
    j["eigenvalues"] = symmetric_eigenvalues(o.lyapunov.P);
    j["eps_star"] = o.range.eps_star ? nlohmann::json(*o.range.eps_star) : nlohmann::json(nullptr);
    j["recommended_eps"] = o.range.recommended_eps;
    if (o.nu_estimate) j["nu_estimate"] = {{"nu1", o.nu_estimate->nu1}, {"nu2", o.nu_estimate->nu2}, {"nu", o.nu_estimate->nu}};
    if (!o.nu_source.empty()) j["nu_source"] = o.nu_source;
    return j;
}

namespace detail {
inline void put_number(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}
} // namespace detail

/// Columns: t, x1..xn, xhat1..xhatn, e_norm, eta_norm, envelope, radius.
/// `envelope` is the decaying part coef e^{-rate t}; both are nan without a certificate.
inline void write_trajectory_csv(std::ostream& os, const SimulationResult& r, const StabilityCertificate* cert) {
    const std::size_t n = r.n;
    os << "t";
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",xhat" << i;
    os << ",e_norm,eta_norm,envelope,radius\n";
    const auto& traj = r.trajectory;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        detail::put_number(os, t);
        for (double v : traj.state(k)) {
            os << ',';
            detail::put_number(os, v);
        }
        os << ',';
        detail::put_number(os, r.error_norms[k]);
        os << ',';
        detail::put_number(os, r.eta_norms[k]);
        os << ',';
        detail::put_number(os, cert ? cert->envelope_coef * std::exp(-cert->envelope_rate * (t - traj.time(0))) : NAN);
        os << ',';
        detail::put_number(os, cert ? cert->radius : NAN);
        os << '\n';
    }
}

inline nlohmann::json simulation_summary(const SimulationOutcome& o) {
    nlohmann::json j;
    const auto& r = o.result;
    j["rows"] = r.trajectory.size();
    j["mode"] = to_string(r.mode);
    j["eps"] = r.eps;
    j["complete"] = r.trajectory.complete();
    if (const auto& f = r.trajectory.failure()) j["failure"] = *f;
    j["h1_escape"] = r.h1_escape;
    double max_err = 0.0;
    for (double e : r.error_norms) max_err = std::max(max_err, e);
    j["max_error"] = max_err;
    j["final_error"] = r.error_norms.empty() ? 0.0 : r.error_norms.back();
    if (o.envelope) {
        j["pass"] = o.envelope->pass && r.trajectory.complete();
        j["min_margin"] = o.envelope->min_margin;
        j["violations"] = o.envelope->violations.size();
        if (o.envelope->worst)
            j["worst_violation"] = {{"t", o.envelope->worst->t},
                                    {"measured", o.envelope->worst->measured},
                                    {"bound", o.envelope->worst->bound}};
    } else {
        j["pass"] = nullptr;
    }
    if (o.certification) j["certificate"] = certification_to_json(*o.certification);
    return j;
}

} // namespace hgo
