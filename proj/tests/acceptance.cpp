// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hgo/hgo.hpp"

using namespace hgo;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void criterion(int id, const char* name, double limit_ms, const std::function<Outcome()>& body) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (limit_ms > 0.0 && ms > limit_ms) {
        out.pass = false;
        out.detail += fmt("; runtime %.3f ms exceeds %.0f ms", ms, limit_ms);
    }
    if (!out.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.3f ms", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str(), ms);
    if (limit_ms > 0.0) std::printf(" / limit %.0f ms", limit_ms);
    std::printf("]\n");
    std::fflush(stdout);
}

const std::vector<double> kGain{-5, -5};

RunConfig theorem1_config() {
    auto cfg = polar_molecule_config();
    cfg.delay = DelayModel::constant(0.25);
    cfg.mode = StabilityMode::Exponential;
    return cfg;
}

// Polynomial product, coefficients highest degree first.
std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    return r;
}

Outcome lyapunov_reproduction() {
    const Matrix a_l = observer_error_matrix(kGain);
    const auto tr = solve_lyapunov(a_l, LyapunovConvention::Transposed);
    const auto aw = solve_lyapunov(a_l, LyapunovConvention::AsWritten);
    const double printed[2][2] = {{0.12, 0.10}, {0.10, 1.10}};
    double p_err = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) p_err = std::max(p_err, std::abs(tr.P(i, j) - printed[i][j]));
    auto spectrum_err = [](const LyapunovSolution& s) {
        const auto ev = symmetric_eigenvalues(s.P);
        return std::max(std::abs(ev.front() - 0.1099), std::abs(ev.back() - 1.1101));
    };
    const double res = lyapunov_residual(a_l, aw.P, LyapunovConvention::AsWritten).max_abs();
    const double e_tr = spectrum_err(tr), e_aw = spectrum_err(aw);
    return {p_err <= 1e-10 && e_tr <= 5e-4 && res <= 1e-10 && e_aw <= 5e-4,
            fmt("TRANSPOSED |P - printed| = %.2e, spectrum err %.2e; AS_WRITTEN residual %.2e, spectrum err %.2e",
                p_err, e_tr, res, e_aw)};
}

Outcome lyapunov_property() {
    // Pole moduli stay below ~6 so that |A_L| |P| eps_mach is well under the 1e-8 residual bound.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> re(-5.0, -0.1), im(0.1, 3.0), coin(0.0, 1.0);
    double worst_res = 0.0, worst_lmin = INFINITY;
    int routh_mismatch = 0, unstable_checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 6;
        std::vector<double> poly{1.0};
        std::size_t deg = 0;
        while (deg < n) {
            if (n - deg >= 2 && coin(rng) < 0.5) {
                const double a = re(rng), b = im(rng);
                poly = poly_mul(poly, {1.0, -2.0 * a, a * a + b * b});
                deg += 2;
            } else {
                poly = poly_mul(poly, {1.0, -re(rng)});
                deg += 1;
            }
        }
        const auto gain = place_poles(poly);
        if (!is_hurwitz(companion_char_poly(gain))) ++routh_mismatch;
        const Matrix a_l = observer_error_matrix(gain);
        const auto s = solve_lyapunov(a_l, LyapunovConvention::AsWritten);
        worst_res = std::max(worst_res, lyapunov_residual(a_l, s.P, LyapunovConvention::AsWritten).max_abs());
        worst_lmin = std::min(worst_lmin, s.lambda_min);

        // Same spectrum with one real root pushed into the right half-plane.
        auto bad = poly_mul(std::vector<double>{1.0, -0.5 - coin(rng)}, poly);
        if (is_hurwitz(bad)) ++routh_mismatch;
        ++unstable_checked;
    }
    return {worst_res <= 1e-8 && worst_lmin > 0.0 && routh_mismatch == 0,
            fmt("200 systems, max residual %.2e, min lambda_min %.3e, Routh mismatches %d (of %d stable + %d unstable)",
                worst_res, worst_lmin, routh_mismatch, 200, unstable_checked)};
}

Outcome epsilon_feasibility() {
    const auto cfg = polar_molecule_config();
    const auto lyap = design_lyapunov(cfg.gain, cfg.convention);
    const auto problem = feasibility_problem(cfg, lyap);
    bool grid_ok = true;
    double grid_min = INFINITY;
    for (int k = 1; k <= 11; ++k) {
        const double v = problem.lhs(0.005 * k);
        grid_min = std::min(grid_min, v);
        grid_ok = grid_ok && v > 0.0;
    }
    const auto range = find_epsilon_range(problem, cfg.eps_max, 1e-6);
    const double l06 = problem.lhs(0.06), l08 = problem.lhs(0.08);
    bool star_ok = range.eps_star.has_value() && *range.eps_star >= 0.06 && *range.eps_star <= 0.08;
    double star = range.eps_star.value_or(NAN);
    bool bracket = star_ok && problem.lhs(star - 1e-6) > 0.0 && problem.lhs(star + 1e-6) < 0.0;
    return {grid_ok && star_ok && bracket && l06 > 0.0 && l08 < 0.0,
            fmt("STRICT beta=%.2f: min LHS on grid %.4f, eps* = %.7f (sign change within 1e-6: %s), LHS(0.06) = %.4f, "
                "LHS(0.08) = %.4f",
                cfg.delay.beta(), grid_min, star, bracket ? "yes" : "no", l06, l08)};
}

Outcome sigma_solver() {
    const auto lyap = design_lyapunov(kGain, LyapunovConvention::AsWritten);
    const auto g = gamma_eval(polar_molecule_config().system.gamma, 0.05, 2);
    const SigmaProblem thm1{lyap.lambda_min, lyap.lambda_max, 2, g.gamma1, g.gamma2, 0.05, 0.25, 1.0,
                            StabilityMode::Exponential};
    const SigmaProblem thm2{lyap.lambda_min, lyap.lambda_max, 2, g.gamma1, g.gamma2, 0.05, 0.26, 0.99,
                            StabilityMode::Practical};
    const double s1 = find_sigma(thm1), s2 = find_sigma(thm2);
    const bool ok1 = s1 >= 1.3 && s1 <= 1.5 && thm1.slack(s1) >= 1e-9 && thm1.slack(1.05 * s1) < 0.0;
    const bool ok2 = s2 >= 0.9 && s2 <= 1.1 && thm2.slack(s2) >= 1e-9 && thm2.slack(1.05 * s2) < 0.0;
    return {ok1 && ok2, fmt("Thm1 sigma = %.6f (slack %.2e, at 1.05x %.2e); Thm2 sigma = %.6f (slack %.2e, at 1.05x %.2e)",
                            s1, thm1.slack(s1), thm1.slack(1.05 * s1), s2, thm2.slack(s2), thm2.slack(1.05 * s2))};
}

DdeProblem unit_delay_problem() {
    DdeProblem p;
    p.dim = 1;
    p.prehistory = [](double, std::span<double> out) { out[0] = 1.0; };
    p.rhs = [](double t, std::span<const double>, const HistoryBuffer& past, std::span<double> dy) {
        double v = 0.0;
        past.sample(t - 1.0, std::span(&v, 1));
        dy[0] = -v;
    };
    p.lags = [](double, std::vector<double>& lags) { lags.push_back(1.0); };
    return p;
}

Outcome dde_fixtures() {
    const auto p = unit_delay_problem();
    const auto a = integrate(p, 0.0, 2.0, 1e-3);
    const auto b = integrate(p, 0.0, 2.0, 5e-4);
    const double x1 = a.state(1000)[0], x2 = a.state(2000)[0];
    const double err_h = std::abs(x2 + 0.5), err_half = std::abs(b.state(b.size() - 1)[0] + 0.5);
    const double ratio = err_half > 0.0 ? err_h / err_half : INFINITY;
    const bool fixtures = std::abs(x1) <= 1e-8 && err_h <= 1e-8;
    const bool order = ratio >= 8.0 && ratio <= 32.0;
    return {fixtures && order, fmt("|x(1)| = %.2e, |x(2)+0.5| = %.2e; t=2 error ratio h=1e-3 -> 5e-4: %.3g (%.2e / %.2e)%s",
                                   std::abs(x1), err_h, ratio, err_h, err_half,
                                   order ? "" : ", expected [8, 32]: both errors are at roundoff level")};
}

Outcome theorem1() {
    const auto out = simulate_config(theorem1_config());
    const auto& env = *out.envelope;
    const double e10 = out.result.error_norms.at(10000);
    return {out.result.trajectory.complete() && env.pass && e10 < 1e-6,
            fmt("%zu grid points, envelope min margin %.3e, violations %zu, |e(10)| = %.3e, sigma = %.4f",
                out.result.trajectory.size(), env.min_margin, env.violations.size(), e10,
                out.certification->certificate.sigma)};
}

Outcome theorem2() {
    const auto out = simulate_config(polar_molecule_config());
    const auto& cert = out.certification->certificate;
    double tail = 0.0;
    for (std::size_t k = 10000; k < out.result.error_norms.size(); ++k) tail = std::max(tail, out.result.error_norms[k]);
    const auto& env = *out.envelope;
    return {out.result.trajectory.complete() && tail <= cert.radius && env.pass,
            fmt("sup_[10,20] |e| = %.3e <= radius %.4f (nu = %.4f %s); full bound violations %zu, min margin %.3e",
                tail, cert.radius, cert.nu, out.certification->nu_source.c_str(), env.violations.size(),
                env.min_margin)};
}

Outcome zero_error() {
    double worst = 0.0;
    bool complete = true;
    for (auto mode : {StabilityMode::Exponential, StabilityMode::Practical}) {
        auto cfg = theorem1_config();
        cfg.mode = mode;
        cfg.history.phi_xhat = cfg.history.phi_x;
        const auto r = run_simulation(cfg, 0.05);
        complete = complete && r.trajectory.complete();
        for (double e : r.error_norms) worst = std::max(worst, e);
    }
    return {complete && worst <= 1e-9, fmt("max |e| over [0,20] in both modes = %.3e", worst)};
}

Outcome a1_sampling() {
    auto sys = polar_molecule_config().system;
    const auto paper = check_a1_samples(sys, 0.05, {10000, 5.0, 1});
    sys.gamma = GammaSpec::formulas("0.01*(1+eps)/24", "0.01*(1+eps)/12", "0.01*(1+eps)");
    const auto scaled = check_a1_samples(sys, 0.05, {10000, 5.0, 1});
    return {!paper.falsified() && scaled.falsified(),
            fmt("paper gammas: %s (first %.4f, second %.4f); 0.01-scaled: %s", paper.summary().c_str(),
                paper.min_slack_first, paper.min_slack_second, scaled.summary().c_str())};
}

Outcome lkf_decay() {
    const auto cfg = theorem1_config();
    const auto out = simulate_config(cfg);
    const auto& cert = out.certification->certificate;
    const auto v = eval_lkf(out.result, cert, cfg.delay);
    const auto report = check_lkf_decay(out.result.trajectory.times(), v, cert.sigma, cert.tau, 1e-6);
    return {report.pass, fmt("V(0) = %.4f, worst step excess %.3e at t = %.3f, worst excess over V(0)e^{-sigma t/tau} %.3e",
                             v.front(), report.worst_excess, report.worst_time, report.worst_global_excess)};
}

} // namespace

int main() {
    criterion(1, "Lyapunov reproduction", 1.0, lyapunov_reproduction);
    criterion(2, "Lyapunov property suite", 5000.0, lyapunov_property);
    criterion(3, "eps-feasibility", 1000.0, epsilon_feasibility);
    criterion(4, "sigma solver", 10.0, sigma_solver);
    criterion(5, "DDE integrator fixtures", 2000.0, dde_fixtures);
    criterion(6, "Theorem 1 end-to-end", 30000.0, theorem1);
    criterion(7, "Theorem 2 end-to-end", 30000.0, theorem2);
    criterion(8, "zero-error invariance", 0.0, zero_error);
    criterion(9, "A1 sampling", 5000.0, a1_sampling);
    criterion(10, "LKF decay", 0.0, lkf_decay);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
