#include <gtest/gtest.h>

#include "gexp/claims.hpp"
#include "gexp/hedging.hpp"
#include "gexp/oracle.hpp"

using namespace gexp;

namespace {

std::vector<State> constant_path(double slope, int n, double T) {
    std::vector<State> p(n + 1);
    for (int k = 0; k <= n; ++k) {
        p[k].t = T * k / n;
        p[k].q = slope * p[k].t;
        p[k].b = 0.1 * k;
    }
    return p;
}

}  // namespace

TEST(Band, RejectsBadOrder) {
    EXPECT_THROW(VolatilityBand(4.0, 1.0), InputError);
    EXPECT_THROW(VolatilityBand(0.0, 1.0), InputError);
    EXPECT_NO_THROW(VolatilityBand(2.0, 2.0));
    VolatilityBand b;
    EXPECT_DOUBLE_EQ(b.sigma_hi(), 2.0);
    EXPECT_DOUBLE_EQ(b.sigma_lo(), 1.0);
}

TEST(GFunction, ClosedFormValues) {
    const VolatilityBand b(1, 4);
    EXPECT_DOUBLE_EQ(g_function(2.0, b), 4.0);
    EXPECT_DOUBLE_EQ(g_function(-2.0, b), -1.0);
    EXPECT_DOUBLE_EQ(g_function(0.0, b), 0.0);
    EXPECT_DOUBLE_EQ(g_function(0.0, VolatilityBand(0.3, 7.0)), 0.0);
}

TEST(GFunction, SymmetrisedIdentity) {
    const VolatilityBand b(1, 4);
    for (int x = -3; x <= 3; ++x)
        EXPECT_NEAR(2 * g_function(x, b) + 2 * g_function(-x, b), std::abs(x) * b.spread(), 1e-14);
}

TEST(GFunction, MonotoneConvexHomogeneous) {
    const VolatilityBand b(0.5, 3.0);
    for (double y = -3; y < 3; y += 0.25) {
        EXPECT_LE(g_function(y, b), g_function(y + 0.25, b));
        const double mid = g_function(y + 0.125, b);
        EXPECT_LE(mid, 0.5 * (g_function(y, b) + g_function(y + 0.25, b)) + 1e-15);
        for (double l : {0.0, 0.5, 2.0, 7.0}) EXPECT_NEAR(g_function(l * y, b), l * g_function(y, b), 1e-12);
    }
}

TEST(TimeGrid, RightContinuousIntervals) {
    TimeGrid g({0.0, 0.5, 1.0});
    EXPECT_EQ(g.interval_of(0.0), 0u);
    EXPECT_EQ(g.interval_of(0.5), 0u);
    EXPECT_EQ(g.interval_of(0.50001), 1u);
    EXPECT_EQ(g.interval_of(1.0), 1u);
    EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5}), InputError);
    EXPECT_THROW(TimeGrid({0.1, 0.5}), InputError);
}

TEST(Feedback, PiecewiseChangesOnlyAtKnots) {
    TimeGrid g({0.0, 0.5, 1.0});
    auto p = FeedbackProcess::piecewise(g, [](std::size_t, const State& s) { return s.b; });
    std::vector<State> path(5);
    for (int k = 0; k < 5; ++k) path[k] = State{0.25 * k, double(k + 1), 0.0, 1.0, 0.0};
    auto at = [&](int k) { return p(PathView{std::span<const State>(path.data(), k + 1), 0.25}); };
    EXPECT_EQ(at(0), 1.0);
    EXPECT_EQ(at(1), 1.0);
    EXPECT_EQ(at(2), 3.0);  // interval (0.5, 1] frozen at the state at 0.5
    EXPECT_EQ(at(3), 3.0);
}

TEST(KAlongPath, ZeroEta) {
    auto p = constant_path(2.0, 10, 1.0);
    EXPECT_EQ(k_along_path(FeedbackProcess::constant(0.0), p, VolatilityBand(1, 4)), 0.0);
}

TEST(KAlongPath, UnitEtaHighSlopeVanishes) {
    auto p = constant_path(4.0, 10, 1.0);
    EXPECT_NEAR(k_along_path(FeedbackProcess::constant(1.0), p, VolatilityBand(1, 4)), 0.0, 1e-12);
}

TEST(KAlongPath, UnitEtaLowSlope) {
    auto p = constant_path(1.0, 10, 1.0);
    EXPECT_NEAR(k_along_path(FeedbackProcess::constant(1.0), p, VolatilityBand(1, 4)), 3.0, 1e-12);
}

TEST(KAlongPath, RejectsInadmissibleSlope) {
    auto p = constant_path(5.0, 10, 1.0);
    EXPECT_THROW(k_along_path(FeedbackProcess::constant(1.0), p, VolatilityBand(1, 4)), InputError);
}

TEST(Negate, WorkedSubstitution) {
    const VolatilityBand band(1, 4);
    StepEta s;
    s.mean = 0.7;
    s.theta = FeedbackProcess::constant(1.0);
    s.t = 0.5;
    s.maturity = 1.0;
    s.eta_bar = [](const State&) { return 1.0; };
    s.abs_mean = 1.0;
    s.mu = FeedbackProcess::constant(0.2);
    s.xi = FeedbackProcess::constant(0.1);
    auto n = negate_decomposition(s, band);
    EXPECT_NEAR(n.mu_bar(0.25, 0.0, 0.0), -0.7, 1e-12);
    EXPECT_NEAR(n.mu_bar(0.75, 0.0, 0.0), -1.0, 1e-12);
    EXPECT_NEAR(n.xi_bar(0.25, 0.0, 0.0), 0.15, 1e-12);
    EXPECT_NEAR(n.xi_bar(0.75, 0.0, 0.0), -1.0, 1e-12);
    EXPECT_NEAR(n.d.mean, -0.7 + 1.5, 1e-12);
}

TEST(Negate, ZeroEtaIsSignFlip) {
    const VolatilityBand band(1, 4);
    StepEta s;
    s.mean = 2.0;
    s.theta = FeedbackProcess::of_tbq([](double, double b, double) { return b; });
    s.eta_bar = [](const State&) { return 0.0; };
    auto n = negate_decomposition(s, band);
    EXPECT_DOUBLE_EQ(n.d.mean, -2.0);
    EXPECT_DOUBLE_EQ(n.d.theta(0.2, 1.5, 0.3), -1.5);
    EXPECT_DOUBLE_EQ(n.d.theta(0.7, 1.5, 0.3), -1.5);
    EXPECT_DOUBLE_EQ(n.d.eta(0.7, 1.5, 0.3), 0.0);
}

TEST(Negate, MeanMatchesOracle) {
    const VolatilityBand band(1, 4);
    const double c = 1.0, m = 0.3;
    StepEta s;
    s.mean = m;
    s.eta_bar = [c](const State&) { return c; };
    s.abs_mean = c;
    auto n = negate_decomposition(s, band);
    // H = m + c (q_T - q_t) - 2G(c)(T - t)
    Decomposed h;
    h.mean = m;
    h.grid = TimeGrid({0.0, 0.5, 1.0});
    h.eta = FeedbackProcess::splice(h.grid, {FeedbackProcess::constant(0.0), FeedbackProcess::constant(c)});
    auto tree = ScenarioTree::make(8, 1.0, band, 0);
    const double oracle = claim_expectation(h, tree, -1.0);
    EXPECT_NEAR(n.d.mean, oracle, 1e-10);
    EXPECT_NEAR(n.d.mean, -m + c * 3.0 * 0.5, 1e-12);
}

TEST(Negate, InvolutionOnMeans) {
    const VolatilityBand band(1, 4);
    StepEta s;
    s.mean = 1.25;
    s.eta_bar = [](const State&) { return 0.0; };
    auto n1 = negate_decomposition(s, band);
    s.mean = n1.d.mean;
    auto n2 = negate_decomposition(s, band);
    EXPECT_NEAR(n2.d.mean, 1.25, 1e-12);
}

TEST(Negate, RejectsNonStep) {
    StepEta s;
    s.t = 1.0;
    s.eta_bar = [](const State&) { return 1.0; };
    EXPECT_THROW(negate_decomposition(s, VolatilityBand(1, 4)), InputError);
}

TEST(Classify, CanonicalClaims) {
    const VolatilityBand band(1, 4);
    HedgeConfig cfg;
    auto dec = [&](const ClaimSpec& c) {
        return extract_decomposition(std::make_shared<const GridFunction>(solve_claim(c, band, cfg.pde)));
    };
    ClaimSpec b = TerminalB{builtin_payoff("identity"), 1.0, "x"};
    ClaimSpec b2 = TerminalB{builtin_payoff("square"), 1.0, "x^2"};
    ClaimSpec vs = volatility_swap();
    ClaimSpec call = TerminalB{builtin_payoff("call", {1.0, 1.0, {}}), 1.0, "call"};
    EXPECT_EQ(classify(b, dec(b), band, 5e-3), HedgeClass::SymmetricReplicable);
    EXPECT_EQ(classify(b2, dec(b2), band, 5e-3), HedgeClass::DeterministicEta);
    EXPECT_EQ(classify(vs, dec(vs), band, 5e-3), HedgeClass::MaximalEta);
    EXPECT_EQ(classify(call, dec(call), band, 5e-3), HedgeClass::GeneralBoundsOnly);
}

TEST(Classify, PiecewiseRouting) {
    const VolatilityBand band(1, 4);
    ClaimSpec two = exponential_two_step();
    ClaimSpec one = exponential_one_step();
    EXPECT_EQ(classify(two, to_decomposition(std::get<PiecewiseEta>(two), band), band), HedgeClass::TwoStepRecursive);
    EXPECT_EQ(classify(one, to_decomposition(std::get<PiecewiseEta>(one), band), band), HedgeClass::OneStep);
}

TEST(Classify, DegenerateBandIsReplicable) {
    const VolatilityBand band(4, 4);
    ClaimSpec call = TerminalB{builtin_payoff("call", {1.0, 1.0, {}}), 1.0, "call"};
    auto d = extract_decomposition(solve_claim(call, band));
    EXPECT_EQ(classify(call, d, band), HedgeClass::SymmetricReplicable);
}

TEST(Portfolio, UnitsFromExposure) {
    Portfolio p;
    p.phi_x = FeedbackProcess::of_tbq([](double, double, double) { return 2.0; });
    p.x0 = 1.0;
    EXPECT_NEAR(p.units(0.0, 0.0, 0.0), 2.0, 1e-15);
    EXPECT_NEAR(p.units(0.5, 1.0, 2.0), 2.0, 1e-15);
}
