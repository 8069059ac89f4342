#pragma once

// Co-simulation of the plant and the high-gain observer as one stacked DDE
// of dimension 2n, plus post-processing: error norms, Lyapunov-Krasovskii
// functional values, delay-mismatch bounds nu and envelope checks.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgo/certify.hpp"
#include "hgo/dde.hpp"
#include "hgo/error.hpp"
#include "hgo/linalg.hpp"
#include "hgo/model.hpp"

namespace hgo {

struct ObserverSpec {
    std::vector<double> gain; ///< base gain L with A + L C Hurwitz
    double eps = 1.0;
};

/// L(eps)_i = l_i / eps^i.
inline std::vector<double> build_observer_gain(std::span<const double> gain, double eps) {
    if (!(eps > 0.0)) throw Error("eps must be positive");
    std::vector<double> out(gain.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < gain.size(); ++i) {
        scale *= eps;
        out[i] = gain[i] / scale;
    }
    return out;
}

struct SimulationOptions {
    double t0 = 0.0;
    double t_end = 20.0;
    double h = 1e-3;
    StabilityMode mode = StabilityMode::Practical;
    double k_bound = 1e3; ///< box K for the plant state, ||x||_inf <= k_bound
};

struct EnvelopeViolation {
    double t = 0.0;
    double measured = 0.0;
    double bound = 0.0;
};

struct SimulationResult {
    Trajectory trajectory; ///< stacked (x, xhat)
    std::size_t n = 0;
    double eps = 1.0;
    StabilityMode mode = StabilityMode::Practical;
    std::vector<double> error_norms; ///< ||xhat - x||
    std::vector<double> eta_norms;   ///< ||D(eps)(xhat - x)||
    std::vector<double> envelope_values;
    std::vector<double> lkf_values;
    std::vector<EnvelopeViolation> violations;
    bool h1_escape = false;

    std::vector<double> plant_state(std::size_t k) const {
        auto s = trajectory.state(k);
        return {s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n)};
    }
    std::vector<double> observer_state(std::size_t k) const {
        auto s = trajectory.state(k);
        return {s.begin() + static_cast<std::ptrdiff_t>(n), s.end()};
    }
};

namespace detail {

struct CompiledHistory {
    std::vector<CompiledExpression> phi_x, phi_xhat;

    explicit CompiledHistory(const HistorySpec& h) {
        static const std::string s = "s";
        for (const auto& e : h.phi_x) phi_x.emplace_back(e, std::span(&s, 1));
        for (const auto& e : h.phi_xhat) phi_xhat.emplace_back(e, std::span(&s, 1));
    }

    void eval(double s, std::span<double> out) const {
        const std::size_t n = phi_x.size();
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = phi_x[i](std::span(&s, 1));
            out[n + i] = phi_xhat[i](std::span(&s, 1));
        }
    }
};

inline double scaled_error_norm(std::span<const double> stacked, std::size_t n, double eps) {
    double s = 0.0, w = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = w * (stacked[n + i] - stacked[i]);
        s += e * e;
        w *= eps;
    }
    return std::sqrt(s);
}

inline double error_norm(std::span<const double> stacked, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = stacked[n + i] - stacked[i];
        s += e * e;
    }
    return std::sqrt(s);
}

} // namespace detail

/// Delay used by the observer: tau in exponential mode, tau_star in practical mode.
inline double observer_delay(const DelayModel& delay, StabilityMode mode) {
    return mode == StabilityMode::Exponential ? delay.tau() : delay.tau_star();
}

/// Integrates plant and observer together on [t0, t_end].
///
/// Plant row i: x_{i+1} + f_i(x, x(t - tau(t)), u, u(t - tau(t))).
/// Observer row i: xhat_{i+1} + f_i(xhat, xhat(t - d), u, u(t - d)) + L(eps)_i (xhat_1 - x_1),
/// with d = tau (exponential mode) or tau_star (practical mode); x_{n+1} = 0.
inline SimulationResult simulate_plant_observer(const TriangularSystem& sys, const DelayModel& delay,
                                                const ObserverSpec& observer, const HistorySpec& history,
                                                const SimulationOptions& opts) {
    const std::size_t n = sys.n, m = sys.m;
    if (opts.mode == StabilityMode::Exponential && delay.kind() != DelayKind::Constant)
        throw Error("exponential mode requires a constant delay");
    if (observer.gain.size() != n) throw Error("observer gain must have n components");
    if (history.phi_x.size() != n || history.phi_xhat.size() != n) throw Error("history must have n components");

    auto compiled = std::make_shared<CompiledSystem>(sys);
    auto phi = std::make_shared<detail::CompiledHistory>(history);
    const auto gain = build_observer_gain(observer.gain, observer.eps);
    const double obs_lag = observer_delay(delay, opts.mode);

    struct Scratch {
        std::vector<double> past, u, ud, uhd, f;
    };
    auto scratch = std::make_shared<Scratch>(Scratch{std::vector<double>(2 * n), std::vector<double>(m),
                                                     std::vector<double>(m), std::vector<double>(m),
                                                     std::vector<double>(n)});
    std::vector<double> xd(n), xhd(n);

    DdeProblem problem;
    problem.dim = 2 * n;
    problem.prehistory = [phi](double s, std::span<double> out) { phi->eval(s, out); };
    problem.lags = [&delay, obs_lag](double t, std::vector<double>& lags) {
        lags.push_back(delay.at(t));
        lags.push_back(obs_lag);
    };
    problem.rhs = [&, compiled, scratch, xd, xhd](double t, std::span<const double> y, const HistoryBuffer& past,
                                                  std::span<double> dy) mutable {
        auto& s = *scratch;
        const double tau_t = delay.at(t);
        compiled->input(t, s.u);

        past.sample(t - tau_t, s.past);
        std::copy(s.past.begin(), s.past.begin() + static_cast<std::ptrdiff_t>(n), xd.begin());
        compiled->input(t - tau_t, s.ud);

        past.sample(t - obs_lag, s.past);
        std::copy(s.past.begin() + static_cast<std::ptrdiff_t>(n), s.past.end(), xhd.begin());
        compiled->input(t - obs_lag, s.uhd);

        auto x = y.subspan(0, n);
        auto xh = y.subspan(n, n);
        compiled->nonlinearity(t, x, xd, s.u, s.ud, s.f);
        for (std::size_t i = 0; i < n; ++i) dy[i] = (i + 1 < n ? x[i + 1] : 0.0) + s.f[i];
        compiled->nonlinearity(t, xh, xhd, s.u, s.uhd, s.f);
        const double innovation = xh[0] - x[0];
        for (std::size_t i = 0; i < n; ++i)
            dy[n + i] = (i + 1 < n ? xh[i + 1] : 0.0) + s.f[i] + gain[i] * innovation;
    };
    const double k_bound = opts.k_bound;
    problem.monitor = [n, k_bound](double t, std::span<const double> y) -> std::optional<std::string> {
        for (std::size_t i = 0; i < n; ++i)
            if (std::fabs(y[i]) > k_bound)
                return "H1 escape: plant state leaves ||x||_inf <= " + std::to_string(k_bound) +
                       " at t=" + std::to_string(t);
        return std::nullopt;
    };

    SimulationResult result{integrate(problem, opts.t0, opts.t_end, opts.h), n, observer.eps, opts.mode, {}, {}, {}, {},
                            {}, false};
    result.h1_escape = result.trajectory.failure() && result.trajectory.failure()->starts_with("H1 escape");
    const auto& traj = result.trajectory;
    result.error_norms.resize(traj.size());
    result.eta_norms.resize(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        result.error_norms[k] = detail::error_norm(traj.state(k), n);
        result.eta_norms[k] = detail::scaled_error_norm(traj.state(k), n, observer.eps);
    }
    return result;
}

/// sup over s in [-window, 0] (sampled at step h, endpoints included) of ||D(eps)(phi_xhat(s) - phi_x(s))||.
inline double history_sup_eta(const HistorySpec& history, double eps, double window, double h) {
    const std::size_t n = history.phi_x.size();
    detail::CompiledHistory phi(history);
    std::vector<double> v(2 * n);
    const auto steps = static_cast<std::size_t>(std::ceil(window / h - 1e-9));
    double sup = 0.0;
    for (std::size_t j = 0; j <= steps; ++j) {
        double s = -std::min(window, static_cast<double>(j) * h);
        phi.eval(s, v);
        sup = std::max(sup, detail::scaled_error_norm(v, n, eps));
    }
    return sup;
}

/// eta^T P eta + integral over [t - window, t] of e^{sigma (s - t)/weight_tau} ||eta(s)||^2 ds,
/// by the composite trapezoid rule with panel width <= h.
template <class EtaSampler>
double lkf_value(const Matrix& p, double sigma, double window, double weight_tau, double t, double h,
                 EtaSampler&& eta_at) {
    const std::size_t n = p.rows();
    std::vector<double> eta(n);
    eta_at(t, std::span<double>(eta));
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += eta[i] * p(i, j) * eta[j];

    const auto panels = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(window / h - 1e-9)));
    const double ds = window / static_cast<double>(panels);
    double integral = 0.0;
    for (std::size_t j = 0; j <= panels; ++j) {
        const double s = t - window + static_cast<double>(j) * ds;
        eta_at(s, std::span<double>(eta));
        double sq = 0.0;
        for (double e : eta) sq += e * e;
        const double w = (j == 0 || j == panels) ? 0.5 : 1.0;
        integral += w * std::exp(sigma * (s - t) / weight_tau) * sq;
    }
    return quad + integral * ds;
}

/// V(eta_t) (exponential mode) or W(t, eta_t) (practical mode) at every grid time.
inline std::vector<double> eval_lkf(const SimulationResult& result, const StabilityCertificate& cert,
                                    const DelayModel& delay) {
    if (result.mode != cert.mode) throw Error("certificate mode does not match the simulation");
    const std::size_t n = result.n;
    const auto& traj = result.trajectory;
    std::vector<double> stacked(2 * n);
    auto eta_at = [&](double s, std::span<double> eta) {
        traj.sample(s, stacked);
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            eta[i] = w * (stacked[n + i] - stacked[i]);
            w *= cert.eps;
        }
    };
    std::vector<double> values(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        const double window = cert.mode == StabilityMode::Exponential ? cert.tau : delay.at(t);
        values[k] = lkf_value(cert.P, cert.sigma, window, cert.tau, t, traj.step(), eta_at);
    }
    return values;
}

struct LkfDecayReport {
    bool pass = true;
    double worst_excess = -INFINITY; ///< max over k of V_{k+1} - V_k e^{-sigma h / tau}
    double worst_time = 0.0;
    double worst_global_excess = -INFINITY; ///< max over k of V_k - V_0 e^{-sigma t_k / tau}
};

/// Checks that V(t) e^{sigma t / tau} is non-increasing, measured in V units:
/// V_{k+1} <= V_k e^{-sigma (t_{k+1} - t_k)/tau} + tol and V_k <= V_0 e^{-sigma t_k / tau} + tol.
inline LkfDecayReport check_lkf_decay(std::span<const double> times, std::span<const double> values, double sigma,
                                      double tau, double tol = 1e-6) {
    LkfDecayReport r;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double global = values[k] - values[0] * std::exp(-sigma * (times[k] - times[0]) / tau);
        r.worst_global_excess = std::max(r.worst_global_excess, global);
        if (k + 1 < values.size()) {
            const double local = values[k + 1] - values[k] * std::exp(-sigma * (times[k + 1] - times[k]) / tau);
            if (local > r.worst_excess) {
                r.worst_excess = local;
                r.worst_time = times[k + 1];
            }
        }
    }
    r.pass = r.worst_excess <= tol && r.worst_global_excess <= tol;
    return r;
}

struct NuEstimate {
    double nu1 = 0.0; ///< sup ||x(t - tau_star) - x(t - tau(t))||
    double nu2 = 0.0; ///< sup ||u(t - tau_star) - u(t - tau(t))||
    double nu = 0.0;
};

/// Samples the delay-mismatch norms on the grid points of [t_begin, t_end].
inline NuEstimate estimate_nu(const SimulationResult& result, const TriangularSystem& sys, const DelayModel& delay,
                              double t_begin, double t_end) {
    const auto& traj = result.trajectory;
    const std::size_t n = result.n;
    if (traj.size() == 0 || t_begin < traj.time(0) - 1e-12 || t_end > traj.time(traj.size() - 1) + 1e-9 ||
        t_end < t_begin)
        throw Error("nu window exceeds the trajectory");
    CompiledSystem compiled(sys);
    std::vector<double> a(2 * n), b(2 * n), ua(sys.m), ub(sys.m);
    const double tau_star = delay.tau_star();
    NuEstimate est;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        if (t < t_begin - 1e-12 || t > t_end + 1e-12) continue;
        const double tau_t = delay.at(t);
        traj.sample(t - tau_star, a);
        traj.sample(t - tau_t, b);
        double dx = 0.0;
        for (std::size_t i = 0; i < n; ++i) dx += (a[i] - b[i]) * (a[i] - b[i]);
        compiled.input(t - tau_star, ua);
        compiled.input(t - tau_t, ub);
        double du = 0.0;
        for (std::size_t j = 0; j < sys.m; ++j) du += (ua[j] - ub[j]) * (ua[j] - ub[j]);
        est.nu1 = std::max(est.nu1, std::sqrt(dx));
        est.nu2 = std::max(est.nu2, std::sqrt(du));
    }
    est.nu = std::max(est.nu1, est.nu2);
    return est;
}

struct EnvelopeReport {
    bool pass = true;
    double min_margin = INFINITY;
    std::optional<EnvelopeViolation> worst;
    std::vector<double> bounds;
    std::vector<double> margins;
    std::vector<EnvelopeViolation> violations;
};

/// Compares ||e(t_k)|| with the certified bound at every grid point.
inline EnvelopeReport check_envelope(const SimulationResult& result, const StabilityCertificate& cert) {
    if (result.mode != cert.mode) throw Error("certificate mode does not match the simulation");
    EnvelopeReport r;
    const auto& traj = result.trajectory;
    r.bounds.resize(traj.size());
    r.margins.resize(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.time(k);
        const double bound = cert.bound_at(t - traj.time(0));
        const double margin = bound - result.error_norms[k];
        r.bounds[k] = bound;
        r.margins[k] = margin;
        r.min_margin = std::min(r.min_margin, margin);
        if (margin < 0.0) {
            EnvelopeViolation v{t, result.error_norms[k], bound};
            r.violations.push_back(v);
            if (!r.worst || bound - v.measured < r.worst->bound - r.worst->measured) r.worst = v;
        }
    }
    r.pass = r.violations.empty();
    return r;
}

/// Copies the envelope series and violations into the result record.
inline void attach_envelope(SimulationResult& result, const EnvelopeReport& report) {
    result.envelope_values = report.bounds;
    result.violations = report.violations;
}

} // namespace hgo
