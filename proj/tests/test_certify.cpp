#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hgo/certify.hpp"

using namespace hgo;

namespace {

// Eigenvalues of the example P: roots of s^2 - 1.22 s + 0.122.
const double kLambdaMin = (1.22 - std::sqrt(1.22 * 1.22 - 4 * 0.122)) / 2;
const double kLambdaMax = (1.22 + std::sqrt(1.22 * 1.22 - 4 * 0.122)) / 2;

GammaSpec paper_gammas() { return GammaSpec::formulas("(1+eps)/24", "(1+eps)/12", "1+eps"); }

LyapunovSolution paper_lyapunov() {
    return solve_lyapunov(Matrix::from_rows({{-5, 1}, {-5, 0}}), LyapunovConvention::AsWritten);
}

FeasibilityProblem paper_problem(StabilityMode mode, Condition2Variant variant = Condition2Variant::Strict) {
    return {kLambdaMin, kLambdaMax, 2, paper_gammas(), mode, mode == StabilityMode::Practical ? 0.99 : 1.0, variant};
}

SigmaProblem paper_sigma(StabilityMode mode) {
    const auto g = gamma_eval(paper_gammas(), 0.05, 2);
    const bool practical = mode == StabilityMode::Practical;
    return {kLambdaMin, kLambdaMax, 2, g.gamma1, g.gamma2, 0.05, practical ? 0.26 : 0.25, practical ? 0.99 : 1.0,
            mode};
}

CertificationRequest paper_request(StabilityMode mode) {
    CertificationRequest r;
    r.lyapunov = paper_lyapunov();
    r.n = 2;
    r.gamma = paper_gammas();
    r.mode = mode;
    r.tau = mode == StabilityMode::Practical ? 0.26 : 0.25;
    r.beta = mode == StabilityMode::Practical ? 0.99 : 1.0;
    r.eps = 0.05;
    r.sup_eta0 = 4.0;
    if (mode == StabilityMode::Practical) r.nu = 0.14;
    return r;
}

// Hand-expanded terms at eps = 0.05 for n = 2.
struct PaperTerms {
    double first = kLambdaMin / (0.05 * kLambdaMax);
    double gamma1 = 2 * 2 * (1.05 / 24) * kLambdaMax;
    double gamma2 = 4 * (1.05 / 12) * (1.05 / 12) * kLambdaMax * kLambdaMax;
};

} // namespace

TEST(Condition1, SpecFixtures) {
    const PaperTerms t;
    const double lhs = condition1_lhs(kLambdaMin, kLambdaMax, 2, 1.05 / 24, 1.05 / 12, 0.05);
    EXPECT_NEAR(lhs, t.first - t.gamma1 - t.gamma2 - 1.0, 1e-14);
    EXPECT_NEAR(lhs, 0.748, 1e-3);
    EXPECT_EQ(condition1_lhs(1.0, 1.0, 3, 0.0, 0.0, 1.0), 0.0);
    EXPECT_LT(condition1_lhs(kLambdaMin, kLambdaMax, 2, 1.5 / 24, 1.5 / 12, 0.5), 0.0);
}

TEST(Condition2, SpecFixtures) {
    const PaperTerms t;
    const double paper = condition2_lhs(kLambdaMin, kLambdaMax, 2, 1.05 / 24, 1.05 / 12, 0.05, 0.99,
                                        Condition2Variant::Paper);
    const double strict = condition2_lhs(kLambdaMin, kLambdaMax, 2, 1.05 / 24, 1.05 / 12, 0.05, 0.99,
                                         Condition2Variant::Strict);
    EXPECT_NEAR(paper, t.first - t.gamma1 - 1.25 - t.gamma2, 1e-14);
    EXPECT_NEAR(strict, t.first - t.gamma1 - 1.25 - t.gamma2 / 0.99, 1e-14);
    EXPECT_NEAR(paper, 0.498, 1e-3);
    EXPECT_NEAR(strict, 0.4976, 1e-4);
    EXPECT_EQ(condition2_lhs(1.0, 1.0, 2, 0.0, 0.0, 0.8, 0.5, Condition2Variant::Strict), 0.0);
}

TEST(Condition2, StrictAtBetaOneIsCondition1MinusAQuarter) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double lmin = u(rng), lmax = lmin + u(rng), g1 = u(rng), g2 = u(rng), eps = u(rng);
        const std::size_t n = 1 + static_cast<std::size_t>(i % 5);
        const double c1 = condition1_lhs(lmin, lmax, n, g1, g2, eps);
        const double c2 = condition2_lhs(lmin, lmax, n, g1, g2, eps, 1.0, Condition2Variant::Strict);
        EXPECT_NEAR(c2, c1 - 0.25, 1e-12 * std::max(1.0, std::abs(c1)));
    }
}

TEST(FindEpsilonRange, PaperExampleStrict) {
    const auto problem = paper_problem(StabilityMode::Practical);
    const auto r = find_epsilon_range(problem, 1.0, 1e-6);
    ASSERT_TRUE(r.feasible);
    ASSERT_TRUE(r.eps_star.has_value());
    EXPECT_GE(*r.eps_star, 0.06);
    EXPECT_LE(*r.eps_star, 0.08);
    EXPECT_NEAR(*r.eps_star, 0.066, 1e-3);
    EXPECT_NEAR(problem.lhs(0.06), 0.165, 1e-3);
    EXPECT_NEAR(problem.lhs(0.08), -0.2526, 1e-3);
    for (int k = 1; k <= 11; ++k) EXPECT_GT(problem.lhs(0.005 * k), 0.0) << "eps " << 0.005 * k;
    EXPECT_NEAR(r.recommended_eps, *r.eps_star / kEpsilonSafetyFactor, 1e-15);
}

TEST(FindEpsilonRange, PaperExampleCondition1) {
    const auto problem = paper_problem(StabilityMode::Exponential);
    const auto r = find_epsilon_range(problem, 1.0, 1e-6);
    ASSERT_TRUE(r.eps_star.has_value());
    EXPECT_GT(*r.eps_star, 0.05);
    EXPECT_NEAR(problem.lhs(0.05), 0.748, 1e-3);
}

TEST(FindEpsilonRange, TrivialCondition1) {
    // LHS = 1/eps - 1 up to a negligible gamma contribution.
    const FeasibilityProblem p{1.0, 1.0, 2, GammaSpec::lipschitz(1e-200), StabilityMode::Exponential, 1.0,
                               Condition2Variant::Strict};
    const auto r = find_epsilon_range(p, 2.0, 1e-9);
    ASSERT_TRUE(r.eps_star.has_value());
    EXPECT_NEAR(*r.eps_star, 1.0, 1e-8);
}

TEST(FindEpsilonRange, FeasibleEverywhereAndInfeasible) {
    const FeasibilityProblem easy{1.0, 1.0, 2, GammaSpec::lipschitz(1e-200), StabilityMode::Exponential, 1.0,
                                  Condition2Variant::Strict};
    const auto r = find_epsilon_range(easy, 0.5);
    EXPECT_FALSE(r.eps_star.has_value());
    EXPECT_EQ(r.recommended_eps, 0.5);

    const FeasibilityProblem hard{1.0, 1.0, 2, GammaSpec::lipschitz(1e6), StabilityMode::Exponential, 1.0,
                                  Condition2Variant::Strict};
    EXPECT_THROW(find_epsilon_range(hard, 1.0), InfeasibleError);
}

TEST(FindEpsilonRange, RecommendedFeasibleAndStarBoundary) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        const double lmin = u(rng);
        const FeasibilityProblem p{lmin, lmin + 2 * u(rng), 1 + static_cast<std::size_t>(i % 4),
                                   GammaSpec::lipschitz(0.5 * u(rng)),
                                   i % 2 ? StabilityMode::Exponential : StabilityMode::Practical, u(rng),
                                   Condition2Variant::Strict};
        EpsilonRange r;
        try {
            r = find_epsilon_range(p, 1.0, 1e-9);
        } catch (const InfeasibleError&) {
            continue;
        }
        EXPECT_GT(p.lhs(r.recommended_eps), 0.0);
        if (r.eps_star) {
            EXPECT_LT(p.lhs(*r.eps_star * 1.05), 0.0);
            ++checked;
        }
    }
    EXPECT_GT(checked, 20);
}

TEST(FindSigma, PaperTheorem1) {
    const auto p = paper_sigma(StabilityMode::Exponential);
    EXPECT_NEAR(p.g(1.3), 0.672, 1e-3);
    EXPECT_NEAR(p.g(1.5), 0.791, 1e-3);
    const double sigma = find_sigma(p);
    EXPECT_GE(sigma, 1.3);
    EXPECT_LE(sigma, 1.5);
    EXPECT_GE(p.slack(sigma), 1e-9);
    EXPECT_LT(p.slack(1.05 * sigma), 0.0);
}

TEST(FindSigma, PaperTheorem2) {
    const auto p = paper_sigma(StabilityMode::Practical);
    EXPECT_NEAR(p.g(1.0), 0.488, 1e-3);
    EXPECT_NEAR(p.g(1.05), 0.5146, 1e-3);
    const double sigma = find_sigma(p);
    EXPECT_GE(sigma, 0.9);
    EXPECT_LE(sigma, 1.1);
    EXPECT_GE(p.slack(sigma), 1e-9);
    EXPECT_LT(p.slack(1.05 * sigma), 0.0);
}

TEST(FindSigma, LinearCase) {
    // b = 0, lambda_min = tau = 1, RHS = 1/(0.5*1) - 1 = 1.
    const SigmaProblem p{1.0, 1.0, 2, 0.0, 0.0, 0.5, 1.0, 1.0, StabilityMode::Exponential};
    EXPECT_EQ(p.rhs(), 1.0);
    EXPECT_NEAR(find_sigma(p, 1e-9), 1.0 - 1e-9, 1e-14);
}

TEST(FindSigma, NonPositiveRightSide) {
    const SigmaProblem p{1.0, 1.0, 2, 0.0, 0.0, 1.0, 1.0, 1.0, StabilityMode::Exponential};
    EXPECT_THROW(find_sigma(p), InfeasibleError);
}

TEST(SigmaProperty, GIsStrictlyIncreasing) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int i = 0; i < 100; ++i) {
        const SigmaProblem p{u(rng), u(rng) + 0.5, 1 + static_cast<std::size_t>(i % 4), u(rng), u(rng), u(rng),
                             u(rng), std::min(1.0, u(rng)),
                             i % 2 ? StabilityMode::Exponential : StabilityMode::Practical};
        EXPECT_EQ(p.g(0.0), 0.0);
        double prev = p.g(0.0);
        for (int k = 1; k <= 1000; ++k) {
            const double v = p.g(0.01 * k);
            ASSERT_GT(v, prev) << "draw " << i << " sigma " << 0.01 * k;
            prev = v;
        }
    }
}

TEST(ErrorEnvelope, Fixtures) {
    auto cert = certify(paper_request(StabilityMode::Exponential));
    EXPECT_NEAR(cert.envelope_rate, cert.sigma / 0.5, 1e-15);
    cert.sigma = 1.4;
    EXPECT_NEAR(error_envelope(cert, 1.0).rate, 2.8, 1e-12);
    EXPECT_EQ(error_envelope(cert, 0.0).coef, 0.0);
    EXPECT_NEAR(error_envelope(cert, 1.0).coef, 20.0 * std::sqrt((kLambdaMax + 0.25) / kLambdaMin), 1e-9);
    EXPECT_NEAR(error_envelope(cert, 1.0).coef_printed, std::sqrt((kLambdaMax + 0.25) / kLambdaMin), 1e-9);

    cert.eps = 1.0;
    EXPECT_NEAR(error_envelope(cert, 2.0).coef, std::sqrt((kLambdaMax + 0.25) / kLambdaMin) * 2.0, 1e-12);
}

TEST(PracticalRadius, Fixtures) {
    auto cert = certify(paper_request(StabilityMode::Practical));
    const auto zero = practical_radius(cert, 0.0);
    EXPECT_EQ(zero.theta, 0.0);
    EXPECT_EQ(zero.radius, 0.0);
    EXPECT_GT(cert.radius, 0.0);
    EXPECT_TRUE(std::isfinite(cert.radius));

    StabilityCertificate unit;
    unit.mode = StabilityMode::Practical;
    unit.eps = 1.0;
    unit.n = 2;
    unit.lambda_max = 1.0;
    unit.lambda_min = 1.0;
    unit.gamma = {1.0, 1.0, 1.0};
    unit.sigma = 1.0;
    unit.tau = 1.0;
    const auto r = practical_radius(unit, 1.0);
    EXPECT_EQ(r.theta, 8.0);
    EXPECT_NEAR(r.radius, std::sqrt(2.0 * 64.0), 1e-12);
    EXPECT_THROW(practical_radius(unit, -1.0), Error);
}

TEST(Certify, InvariantsHold) {
    for (auto mode : {StabilityMode::Exponential, StabilityMode::Practical}) {
        const auto cert = certify(paper_request(mode));
        EXPECT_GT(cert.condition_lhs, 0.0);
        EXPECT_GE(sigma_problem(cert).slack(cert.sigma), 1e-9);
        EXPECT_EQ(cert.b, 2.0 * 2.0 * cert.gamma.gamma2 * cert.lambda_max);
        EXPECT_DOUBLE_EQ(cert.a - cert.c, 0.25);
        EXPECT_EQ(cert.bound_at(0.0), cert.envelope_coef + (mode == StabilityMode::Practical ? cert.radius : 0.0));
    }
}

TEST(Certify, InfeasibleEps) {
    auto req = paper_request(StabilityMode::Practical);
    req.eps = 0.5;
    try {
        certify(req);
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_NE(std::string(e.what()).find("condition LHS negative"), std::string::npos);
    }
    req = paper_request(StabilityMode::Practical);
    req.nu.reset();
    EXPECT_THROW(certify(req), Error);
}

TEST(Certify, RecomputeReproducesStoredConstants) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> eps_dist(0.005, 0.06);
    for (int i = 0; i < 50; ++i) {
        auto req = paper_request(i % 2 ? StabilityMode::Exponential : StabilityMode::Practical);
        req.eps = eps_dist(rng);
        req.lyapunov = solve_lyapunov(Matrix::from_rows({{-5, 1}, {-5, 0}}),
                                      i % 3 ? LyapunovConvention::AsWritten : LyapunovConvention::Transposed);
        const auto stored = certify(req);
        const auto again = recompute_certificate(stored);
        auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); };
        EXPECT_TRUE(near(again.sigma, stored.sigma));
        EXPECT_TRUE(near(again.a, stored.a));
        EXPECT_TRUE(near(again.b, stored.b));
        EXPECT_TRUE(near(again.c, stored.c));
        EXPECT_TRUE(near(again.envelope_coef, stored.envelope_coef));
        EXPECT_TRUE(near(again.envelope_rate, stored.envelope_rate));
        EXPECT_TRUE(near(again.theta, stored.theta));
        EXPECT_TRUE(near(again.radius, stored.radius));
        EXPECT_TRUE(near(again.condition_lhs, stored.condition_lhs));
    }
}
