#pragma once

#include <array>

#include "claims.hpp"
#include "oracle.hpp"
#include "pde.hpp"
#include "search.hpp"

namespace gexp {

struct HedgeConfig {
    SolverConfig pde;
    int depth = 10;          // path oracle depth
    int interior = 2;        // interior controls on lattices
    int path_interior = 0;   // interior controls on non-recombining trees
    int objective_depth = 14;
    ShockScheme objective_scheme = ShockScheme::ThreePoint;
    int objective_interior = 0;
    int dfs_objective_depth = 8;
    double search_tol = 1e-7;
    int prescan = 101;
};

struct Prices {
    double e_h = 0.0;      // E_G[H]
    double e_neg_h = 0.0;  // E_G[-H]
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

inline Interval v0_interval(const Prices& p) { return {-p.e_neg_h, p.e_h}; }

struct HedgeResult {
    Portfolio portfolio;
    double optimal_risk = 0.0;
    HedgeClass hedge_class = HedgeClass::GeneralBoundsOnly;
    std::optional<double> epsilon;
    std::optional<std::pair<double, double>> bounds;
    Prices prices;
    bool boundary = false;
    std::string phi_formula = "theta";
    std::vector<std::pair<std::string, std::string>> diagnostics;

    void note(const std::string& k, const std::string& v) { diagnostics.emplace_back(k, v); }
    void note(const std::string& k, double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        diagnostics.emplace_back(k, buf);
    }
};

inline ScenarioTree path_tree(const ClaimSpec& claim, const VolatilityBand& band, const HedgeConfig& cfg) {
    auto t = ScenarioTree::make(cfg.depth, maturity_of(claim), band, cfg.path_interior);
    t.x0 = x0_of(claim);
    return t;
}

// law of (|eta_t1|, <B>_t1) on the [0,t1] sub-tree
class StepLaw {
public:
    StepLaw(const PiecewiseEta& c, const VolatilityBand& band, const HedgeConfig& cfg) : c_(c), band_(band) {
        c.validate();
        const bool const_mu = !c.mu || c.mu->constant_value().has_value();
        markov_ = bool(c.abs_eta1_closed) || const_mu;
        if (markov_) {
            tree_ = ScenarioTree::make(cfg.objective_depth, c.t1(), band, cfg.objective_interior, cfg.objective_scheme);
        } else {
            tree_ = ScenarioTree::make(std::min(cfg.depth, cfg.dfs_objective_depth), c.t1(), band, cfg.path_interior);
            leaves_ = collect_leaves(tree_, 2, [this](std::span<const State> p, double* o) {
                o[0] = abs_eta1_on_path(c_, p, tree_.dt(), band_);
                o[1] = p.back().q;
            });
        }
    }

    bool markov() const { return markov_; }
    const ScenarioTree& tree() const { return tree_; }

    double abs_eta(const State& s) const {
        if (c_.abs_eta1_closed) return c_.abs_eta1_closed(s);
        const double m = c_.mu ? *c_.mu->constant_value() : 0.0;
        return c_.abs_eta1_mean + m * s.b + c_.xi0 * s.q - 2.0 * g_function(c_.xi0, band_) * c_.t1();
    }

    double expect(const std::function<double(double, double)>& f) const {
        if (markov_) {
            MarkovFunctional mf;
            mf.terminal = [&](const State& s) { return f(abs_eta(s), s.q); };
            return g_expectation(mf, tree_);
        }
        return reduce_table(leaves_, tree_, [&](const double* v) { return f(v[0], v[1]); });
    }

private:
    PiecewiseEta c_;
    VolatilityBand band_;
    bool markov_ = true;
    ScenarioTree tree_;
    LeafTable leaves_;
};

// E_G[K_T] of a decomposed claim along the path tree
inline double expected_k(const Decomposed& c, const VolatilityBand& band, const ScenarioTree& tree) {
    tree.check_grid(c.grid);
    auto t = collect_leaves(tree, 1, [&](std::span<const State> p, double* o) {
        o[0] = k_along_path(c.eta, p, band, tree.dt());
    });
    return reduce_leaves(std::move(t.data), tree, t.levels);
}

inline double expected_k(const PiecewiseEta& c, const VolatilityBand& band, const StepLaw& law) {
    const double y = band.spread() * (c.maturity() - c.t1());
    const double g0 = 2.0 * g_function(c.eta0, band) * c.t1();
    return law.expect([&](double a, double q) { return g0 - c.eta0 * q + y * a; });
}

inline Prices prices_of(const ClaimSpec& claim, const VolatilityBand& band, const HedgeConfig& cfg = {}) {
    if (has_pde(claim)) return {solve_claim(claim, band, cfg.pde).u0(), solve_claim(claim, band, cfg.pde, -1.0).u0()};
    if (auto* d = std::get_if<Decomposed>(&claim))
        return {d->mean, -d->mean + expected_k(*d, band, path_tree(claim, band, cfg))};
    const auto& pe = std::get<PiecewiseEta>(claim);
    StepLaw law(pe, band, cfg);
    return {pe.mean, -pe.mean + expected_k(pe, band, law)};
}

namespace detail {

inline HedgeResult midpoint_hedge(const ClaimSpec& claim, const Decomposition& d, const Prices& pr, HedgeClass cls) {
    HedgeResult r;
    r.hedge_class = cls;
    r.prices = pr;
    r.portfolio.v0 = 0.5 * (pr.e_h - pr.e_neg_h);
    r.portfolio.phi_x = d.theta;
    r.portfolio.x0 = x0_of(claim);
    const double ek = pr.e_h + pr.e_neg_h;
    r.optimal_risk = 0.25 * ek * ek;
    r.note("expected_k", ek);
    if (*d.clamped) r.note("warning", "decomposition evaluated outside the PDE grid");
    return r;
}

}  // namespace detail

inline HedgeResult hedge_deterministic_eta(const ClaimSpec& claim, const Decomposition& d, const VolatilityBand& band,
                                           const Prices& pr) {
    const auto cls = classify(claim, d, band, 5e-3);
    if (cls != HedgeClass::DeterministicEta && cls != HedgeClass::SymmetricReplicable)
        throw ClassError("eta is not deterministic");
    return detail::midpoint_hedge(claim, d, pr, cls);
}

inline HedgeResult hedge_maximal_eta(const ClaimSpec& claim, const Decomposition& d, const VolatilityBand& band,
                                     const Prices& pr, double holder_k = 1.0, double holder_alpha = 1.0) {
    const auto cls = classify(claim, d, band, 5e-3);
    if (cls == HedgeClass::GeneralBoundsOnly || cls == HedgeClass::OneStep || cls == HedgeClass::TwoStepRecursive)
        throw ClassError("eta depends on more than the quadratic variation");
    auto r = detail::midpoint_hedge(claim, d, pr, cls);
    // sampled Hoelder check of eta in q on [0, 5T/6]
    const double T = d.grid.maturity();
    bool ok = true;
    for (int it = 0; it < 5 && ok; ++it) {
        const double t = T * it / 6.0;
        const double qlo = band.var_lo * t, qhi = band.var_hi * t + 1e-3;
        for (int i = 0; i < 8 && ok; ++i)
            for (int j = i + 1; j < 8 && ok; ++j) {
                const double x = qlo + (qhi - qlo) * i / 7.0, y = qlo + (qhi - qlo) * j / 7.0;
                const double lhs = std::abs(d.eta(t, 0.0, x) - d.eta(t, 0.0, y));
                if (lhs > holder_alpha * std::pow(std::abs(x - y), holder_k) + 1e-12) ok = false;
            }
    }
    if (!ok) r.note("warning", "sampled Hoelder check failed");
    return r;
}

inline HedgeResult hedge_one_step(const PiecewiseEta& c, const VolatilityBand& band, const HedgeConfig& cfg = {}) {
    if (c.eta0 != 0.0) throw ClassError("one-step hedge needs eta = 0 on the first interval");
    StepLaw law(c, band, cfg);
    const double y = band.spread() * (c.maturity() - c.t1());
    const double ek = law.expect([&](double a, double) { return y * a; });
    CachedObjective obj([&](double cc) {
        return law.expect([&](double a, double) { return std::max(cc * cc, (cc - y * a) * (cc - y * a)); });
    });
    const auto m = scan_then_golden([&](double x) { return obj(x); }, 0.0, ek, 41, cfg.search_tol * std::max(1.0, ek));
    HedgeResult r;
    r.hedge_class = HedgeClass::OneStep;
    r.prices = {c.mean, -c.mean + ek};
    r.portfolio.v0 = c.mean - m.x;
    r.portfolio.phi_x = c.theta;
    r.optimal_risk = m.f;
    r.boundary = m.x <= cfg.search_tol * std::max(1.0, ek) || m.x >= ek - cfg.search_tol * std::max(1.0, ek);
    if (ek <= 0.0) r.boundary = false;
    r.note("c_star", m.x);
    r.note("c_mid", 0.5 * ek);
    r.note("expected_k", ek);
    r.note("oracle_evaluations", double(obj.calls()));
    if (r.boundary) r.note("warning", "optimum on the boundary of the admissible interval");
    return r;
}

namespace detail {

inline HedgeResult two_step(const PiecewiseEta& c, const VolatilityBand& band, const HedgeConfig& cfg) {
    c.validate();
    if (!c.mu) throw InputError("two-step hedge needs the representation process mu");
    StepLaw law(c, band, cfg);
    const double t1 = c.t1(), T = c.maturity();
    const double y = band.spread() * (T - t1);
    const double eabs = c.abs_eta1_mean;
    // effective first-interval coefficients; xi0 enters through y = spread * dt2
    const double a_eff = c.eta0 - 0.5 * y * c.xi0;
    const double b_eff = 2.0 * (g_function(c.eta0, band) - 0.5 * y * g_function(c.xi0, band));
    const double ek = expected_k(c, band, law);
    CachedObjective F([&](double eps) {
        return law.expect([&](double a, double q) {
            const double v = 0.5 * y * a + std::abs(eps + a_eff * q - b_eff * t1);
            return v * v;
        });
    });
    const double lo = -0.5 * y * eabs, hi = ek - 0.5 * y * eabs;
    const double tol = cfg.search_tol * std::max(1.0, std::abs(hi - lo));
    if (hi < lo - 1e-12) throw InputError("admissible epsilon range is empty");
    HedgeResult r;
    r.hedge_class = HedgeClass::TwoStepRecursive;
    r.prices = {c.mean, -c.mean + ek};
    double eps = 0.0;
    if (c.eta0 == 0.0 && c.xi0 == 0.0) {
        r.optimal_risk = F(0.0);
    } else {
        const auto m = scan_then_golden([&](double e) { return F(e); }, lo, std::max(lo, hi), cfg.prescan, tol);
        eps = m.x;
        r.optimal_risk = m.f;
        r.boundary = (hi - lo > tol) && (eps <= lo + tol || eps >= hi - tol);
    }
    r.epsilon = eps;
    r.portfolio.v0 = c.mean - 0.5 * y * eabs - eps;
    const auto corr = c.theta.plus(c.mu->scaled(-0.5 * y));
    r.portfolio.phi_x = FeedbackProcess::splice(c.grid, {corr, c.theta});
    r.phi_formula = "theta - mu*(var_hi-var_lo)*dt2/2 on (t0,t1], theta on (t1,t2]";
    r.note("expected_k", ek);
    r.note("epsilon_lo", lo);
    r.note("epsilon_hi", hi);
    r.note("objective_evaluations", double(F.calls()));
    r.note("objective_tree", law.markov() ? "lattice" : "path");
    if (r.boundary) r.note("warning", "epsilon on the boundary of the admissible range");
    return r;
}

}  // namespace detail

inline HedgeResult hedge_two_step(const PiecewiseEta& c, const VolatilityBand& band, const HedgeConfig& cfg = {}) {
    if (c.xi0 != 0.0) throw InputError("xi0 != 0: use the generalized two-step hedge");
    return detail::two_step(c, band, cfg);
}

inline HedgeResult hedge_two_step_generalized(const PiecewiseEta& c, const VolatilityBand& band,
                                              const HedgeConfig& cfg = {}) {
    return detail::two_step(c, band, cfg);
}

struct CounterexampleReport {
    double y = 0.0;
    double a = 0.0;
    double c_mid = 0.0;
    double h_mid = 0.0;
    double dh_mid_closed = 0.0;
    double dh_mid_quad = 0.0;
    double c_star = 0.0;
    double h_star = 0.0;
    double search_tol = 0.0;
    bool negative_slope = false;
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Gauss-Legendre nodes and weights on [-1,1]
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5)), dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

// composite Gauss-Legendre of f against the standard normal density on [lo, hi]
inline double normal_quadrature(const std::function<double(double)>& f, double lo, double hi, int pieces = 48) {
    static const auto gl = gauss_legendre(32);
    const double h = (hi - lo) / pieces;
    double s = 0.0;
    for (int p = 0; p < pieces; ++p) {
        const double m = lo + (p + 0.5) * h;
        for (std::size_t i = 0; i < gl.first.size(); ++i) {
            const double n = m + 0.5 * h * gl.first[i];
            s += 0.5 * h * gl.second[i] * f(n) * std::exp(-0.5 * n * n) / std::sqrt(2.0 * M_PI);
        }
    }
    return s;
}

// H(c) = E[c^2 v (c - y e^{aN})^2] under the sigma_hi scenario, a = sigma_hi sqrt(t1)
inline CounterexampleReport counterexample_analysis(double t1, double dt2, const VolatilityBand& band) {
    if (!(t1 > 0.0 && dt2 > 0.0)) throw InputError("t1 and dt2 must be positive");
    CounterexampleReport r;
    r.y = band.spread() * dt2;
    r.a = band.sigma_hi() * std::sqrt(t1);
    const double y = r.y, a = r.a, ea = std::exp(0.5 * a * a);
    r.c_mid = 0.5 * y * ea;
    auto g = [&](double c) { return std::log(2.0 * c / y) / a; };
    auto dh_closed = [&](double c) { return 2.0 * c - 2.0 * y * ea * normal_cdf(a - g(c)); };
    auto h_closed = [&](double c) {
        const double gc = g(c);
        return c * c + y * y * std::exp(2.0 * a * a) * normal_cdf(2.0 * a - gc) - 2.0 * c * y * ea * normal_cdf(a - gc);
    };
    auto upper = [&](double gc) { return std::max(gc, 2.0 * a) + 12.0; };
    auto dh_quad = [&](double c) {
        const double gc = g(c);
        return 2.0 * c - 2.0 * y * normal_quadrature([&](double n) { return std::exp(a * n); }, gc, upper(gc));
    };
    auto h_quad = [&](double c) {
        if (y <= 0.0) return c * c;
        const double gc = c > 0.0 ? g(c) : -40.0;
        return c * c + normal_quadrature([&](double n) {
                           const double z = y * std::exp(a * n);
                           return z * (z - 2.0 * c);
                       }, gc, upper(gc), 96);
    };
    const double ek = y * ea;
    r.search_tol = 1e-8 * std::max(1.0, ek);
    if (y <= 0.0) {
        r.c_mid = r.h_mid = r.dh_mid_closed = r.dh_mid_quad = r.c_star = r.h_star = 0.0;
        return r;
    }
    r.h_mid = h_closed(r.c_mid);
    r.dh_mid_closed = dh_closed(r.c_mid);
    r.dh_mid_quad = dh_quad(r.c_mid);
    r.negative_slope = r.dh_mid_quad < 0.0;
    const auto m = scan_then_golden(h_quad, 0.0, ek, 41, r.search_tol);
    r.c_star = m.x;
    r.h_star = m.f;
    return r;
}

struct RiskBounds {
    double j_lo = 0.0;
    double j_hi = 0.0;
    double expected_k = 0.0;
};

// j_lo = (E_G[K_T]/2)^2, j_hi = E_G[(spread/2 * sum |eta| dt)^2]
inline RiskBounds risk_bounds(const Decomposed& c, const VolatilityBand& band, const ScenarioTree& tree) {
    tree.check_grid(c.grid);
    const double dt = tree.dt();
    auto t = collect_leaves(tree, 2, [&](std::span<const State> p, double* o) {
        double k = 0.0, m = 0.0;
        for (std::size_t i = 0; i + 1 < p.size(); ++i) {
            const double e = c.eta(PathView{p.subspan(0, i + 1), dt});
            const double h = p[i + 1].t - p[i].t;
            k += 2.0 * g_function(e, band) * h - e * (p[i + 1].q - p[i].q);
            m += std::abs(e) * h;
        }
        o[0] = k;
        o[1] = 0.5 * band.spread() * m;
    });
    RiskBounds r;
    r.expected_k = reduce_table(t, tree, [](const double* v) { return v[0]; });
    r.j_lo = 0.25 * r.expected_k * r.expected_k;
    r.j_hi = reduce_table(t, tree, [](const double* v) { return v[1] * v[1]; });
    return r;
}

// portfolio attaining j_hi when |eta_t| = |eta_0| + int mu dB: hedges the fluctuation of sum |eta| dt
inline Portfolio bounds_portfolio(const Decomposed& c, const FeedbackProcess& mu, double expected_k,
                                  const VolatilityBand& band) {
    Portfolio p;
    p.v0 = c.mean - 0.5 * expected_k;
    const double T = c.grid.maturity(), s = band.spread();
    auto th = c.theta;
    p.phi_x = FeedbackProcess::of_path([th, mu, T, s](const PathView& v) {
        return th(v) - 0.5 * s * (T - v.now().t - v.dt) * mu(v);
    });
    return p;
}

inline HedgeResult hedge_general(const ClaimSpec& claim, const Decomposition& d, const VolatilityBand& band,
                                 const Prices& pr, const HedgeConfig& cfg) {
    auto r = detail::midpoint_hedge(claim, d, pr, HedgeClass::GeneralBoundsOnly);
    const double ek = pr.e_h + pr.e_neg_h;
    const double j = terminal_risk(claim, r.portfolio, path_tree(claim, band, cfg));
    r.bounds = std::make_pair(0.25 * ek * ek, j);
    r.optimal_risk = j;
    r.note("warning", "no closed form for this class; risk is the oracle value at the midpoint portfolio");
    return r;
}

inline HedgeResult hedge(const ClaimSpec& claim, const VolatilityBand& band, const HedgeConfig& cfg = {}) {
    if (auto* pe = std::get_if<PiecewiseEta>(&claim)) {
        const auto d = to_decomposition(*pe, band);
        const auto cls = classify(claim, d, band);
        if (cls == HedgeClass::SymmetricReplicable) {
            StepLaw law(*pe, band, cfg);
            const Prices pr{pe->mean, -pe->mean + expected_k(*pe, band, law)};
            return detail::midpoint_hedge(claim, d, pr, cls);
        }
        if (cls == HedgeClass::OneStep) return hedge_one_step(*pe, band, cfg);
        return pe->xi0 == 0.0 ? hedge_two_step(*pe, band, cfg) : hedge_two_step_generalized(*pe, band, cfg);
    }
    Decomposition d;
    Prices pr;
    std::optional<FeedbackProcess> theta_neg;
    if (has_pde(claim)) {
        auto u = std::make_shared<const GridFunction>(solve_claim(claim, band, cfg.pde));
        auto un = std::make_shared<const GridFunction>(solve_claim(claim, band, cfg.pde, -1.0));
        d = extract_decomposition(u);
        theta_neg = extract_decomposition(un).theta;
        pr = {u->u0(), un->u0()};
    } else {
        d = to_decomposition(std::get<Decomposed>(claim));
        pr = prices_of(claim, band, cfg);
    }
    const auto cls = classify(claim, d, band, 5e-3);
    switch (cls) {
        case HedgeClass::SymmetricReplicable:
        case HedgeClass::DeterministicEta: return hedge_deterministic_eta(claim, d, band, pr);
        case HedgeClass::MaximalEta: return hedge_maximal_eta(claim, d, band, pr);
        default:
            // theta of -H is not -theta of H once eta is random; average them so that -H gets the mirrored portfolio
            if (!theta_neg) return hedge_general(claim, d, band, pr, cfg);
            d.theta = d.theta.scaled(0.5).plus(theta_neg->scaled(-0.5));
            auto r = hedge_general(claim, d, band, pr, cfg);
            r.phi_formula = "(theta[H] - theta[-H])/2";
            return r;
    }
}

}  // namespace gexp
