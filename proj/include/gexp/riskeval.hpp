#pragma once

#include <random>

#include "hedging.hpp"

namespace gexp {

struct VerificationReport {
    std::string name;
    std::string kind;  // equality, at_most, at_least, between, optimality, sequence
    bool passed = false;
    double predicted = 0.0;
    double measured = 0.0;
    double tolerance = 0.0;
    std::vector<std::pair<std::string, double>> witness;  // violating parameters, empty on success
    std::vector<std::pair<std::string, double>> values;   // extra numbers worth printing
    std::string notes;
    std::optional<std::uint64_t> seed;
};

inline VerificationReport equality_report(std::string name, double predicted, double measured, double tol) {
    VerificationReport r;
    r.name = std::move(name);
    r.kind = "equality";
    r.predicted = predicted;
    r.measured = measured;
    r.tolerance = tol;
    r.passed = std::abs(predicted - measured) <= tol;
    return r;
}

// measured <= predicted + tol
inline VerificationReport at_most_report(std::string name, double bound, double measured, double tol) {
    VerificationReport r;
    r.name = std::move(name);
    r.kind = "at_most";
    r.predicted = bound;
    r.measured = measured;
    r.tolerance = tol;
    r.passed = measured <= bound + tol;
    return r;
}

inline VerificationReport at_least_report(std::string name, double bound, double measured, double tol) {
    VerificationReport r;
    r.name = std::move(name);
    r.kind = "at_least";
    r.predicted = bound;
    r.measured = measured;
    r.tolerance = tol;
    r.passed = measured >= bound - tol;
    return r;
}

inline double rel_tol(double a, double b, double rel, double floor = 1e-9) {
    return rel * std::max(std::abs(a), std::abs(b)) + floor;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    if (n > 1) v.back() = b;
    return v;
}

namespace detail {

inline ScenarioTree check_tree(const ClaimSpec& claim, const VolatilityBand& band, int depth) {
    auto t = ScenarioTree::make(depth, maturity_of(claim), band, 0);
    t.x0 = x0_of(claim);
    check_claim_tree(claim, t);
    return t;
}

// sum of psi dB along a path
inline double gain(const FeedbackProcess& psi, std::span<const State> p, double dt) {
    double g = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) g += psi(PathView{p.subspan(0, k + 1), dt}) * (p[k + 1].b - p[k].b);
    return g;
}

// J(delta, s) = E_G[(r0 - delta - s g)^2] from a leaf table with columns r0, g
inline double shifted_risk(const LeafTable& t, const ScenarioTree& tree, int col_g, double delta, double s) {
    return reduce_table(t, tree, [&](const double* v) {
        const double r = v[0] - delta - s * v[col_g];
        return r * r;
    });
}

// jointly convex in (delta, s): golden over s of golden over delta
inline std::array<double, 3> nested_minimum(const std::function<double(double, double)>& j, double dlo, double dhi,
                                            double slo, double shi, double tol = 1e-7) {
    double best_d = 0.0;
    auto inner = [&](double s) {
        const auto m = golden_section([&](double d) { return j(d, s); }, dlo, dhi, tol);
        best_d = m.x;
        return m.f;
    };
    const auto outer = scan_then_golden(inner, slo, shi, 9, tol);
    inner(outer.x);
    return {best_d, outer.x, outer.f};
}

}  // namespace detail

struct OptimalityGrid {
    std::vector<double> v0_offsets = linspace(-1.0, 1.0, 21);
    std::vector<double> phi_scale_offsets = linspace(-0.5, 0.5, 21);
    std::vector<FeedbackProcess> phi_basis;  // empty: default basis
    int depth = 8;
};

// constant, phi-proportional, one bump per interval (claim grid, else quarters of [0,T])
inline std::vector<FeedbackProcess> default_basis(const ClaimSpec& claim, const Portfolio& p) {
    std::vector<FeedbackProcess> b{FeedbackProcess::constant(1.0), p.phi_x};
    TimeGrid g = TimeGrid::uniform(maturity_of(claim), 4);
    if (auto* d = std::get_if<Decomposed>(&claim); d && d->grid.intervals() > 1) g = d->grid;
    if (auto* pe = std::get_if<PiecewiseEta>(&claim)) g = pe->grid;
    for (std::size_t i = 0; i < g.intervals(); ++i) {
        std::vector<FeedbackProcess> pieces(g.intervals(), FeedbackProcess::constant(0.0));
        pieces[i] = FeedbackProcess::constant(1.0);
        b.push_back(FeedbackProcess::splice(g, std::move(pieces)));
    }
    return b;
}

inline VerificationReport verify_local_optimality(const ClaimSpec& claim, const HedgeResult& result,
                                                  const VolatilityBand& band, const OptimalityGrid& grid = {}) {
    if (grid.depth < 8) throw InputError("local optimality needs oracle depth >= 8");
    const auto tree = detail::check_tree(claim, band, grid.depth);
    const auto basis = grid.phi_basis.empty() ? default_basis(claim, result.portfolio) : grid.phi_basis;
    const int nb = int(basis.size());
    const double dt = tree.dt();
    auto h = claim_on_path(claim, band, dt);
    auto t = collect_leaves(
        tree, 1 + nb,
        [&](std::span<const State> p, double* o) {
            o[0] = h(p) - p.back().w;
            for (int j = 0; j < nb; ++j) o[1 + j] = detail::gain(basis[j], p, dt);
        },
        &result.portfolio);
    double best = std::numeric_limits<double>::infinity(), bd = 0.0, bs = 0.0;
    int bj = 0;
    for (int j = 0; j < nb; ++j)
        for (double d : grid.v0_offsets)
            for (double s : grid.phi_scale_offsets) {
                const double v = detail::shifted_risk(t, tree, 1 + j, d, s);
                if (v < best) {
                    best = v;
                    bd = d;
                    bs = s;
                    bj = j;
                }
            }
    VerificationReport r;
    r.name = "local_optimality:" + name_of(claim);
    r.kind = "optimality";
    r.predicted = result.optimal_risk;
    r.measured = best;
    r.tolerance = 0.02 * std::abs(result.optimal_risk) + 1e-10;
    r.passed = best >= result.optimal_risk - r.tolerance;
    r.values = {{"risk_at_offset_zero", detail::shifted_risk(t, tree, 1, 0.0, 0.0)},
                {"min_v0_offset", bd},
                {"min_phi_scale_offset", bs},
                {"min_basis_index", double(bj)}};
    if (!r.passed) r.witness = {{"v0_offset", bd}, {"phi_scale_offset", bs}, {"basis_index", double(bj)}, {"risk", best}};
    r.notes = "grid " + std::to_string(grid.v0_offsets.size()) + "x" + std::to_string(grid.phi_scale_offsets.size()) +
              " over " + std::to_string(nb) + " directions, depth " + std::to_string(grid.depth);
    return r;
}

// V0 shifted by +1 with its honest oracle risk: the grid must find the way back
inline HedgeResult shifted_fixture(const ClaimSpec& claim, HedgeResult r, const VolatilityBand& band, int depth = 8,
                                   double shift = 1.0) {
    r.portfolio.v0 += shift;
    r.optimal_risk = terminal_risk(claim, r.portfolio, detail::check_tree(claim, band, depth));
    r.note("fixture", "v0 shifted by " + std::to_string(shift));
    return r;
}

// E_G[X^2] >= max(E_G[X]^2, E_G[-X]^2)
inline VerificationReport jensen_report(std::string name, double ex2, double ex, double enx) {
    const double pred = std::max(ex * ex, enx * enx);
    auto r = at_least_report(std::move(name), pred, ex2, 1e-9 * std::max(1.0, pred));
    r.values = {{"e_x", ex}, {"e_neg_x", enx}};
    return r;
}

inline VerificationReport jensen_check(const std::string& name, const PathFunctional& x, const ScenarioTree& tree) {
    auto t = collect_leaves(tree, 1, [&](std::span<const State> p, double* o) { o[0] = x.eval(p); });
    return jensen_report("jensen:" + name, reduce_table(t, tree, [](const double* v) { return v[0] * v[0]; }),
                         reduce_table(t, tree, [](const double* v) { return v[0]; }),
                         reduce_table(t, tree, [](const double* v) { return -v[0]; }));
}

// terminal functional on the lattice
inline VerificationReport jensen_check(const std::string& name, const std::function<double(const State&)>& x,
                                       const ScenarioTree& tree) {
    MarkovFunctional f2, f1, fn;
    f2.terminal = [&](const State& s) { return x(s) * x(s); };
    f1.terminal = x;
    fn.terminal = [&](const State& s) { return -x(s); };
    return jensen_report("jensen:" + name, g_expectation(f2, tree), g_expectation(f1, tree), g_expectation(fn, tree));
}

inline VerificationReport jensen_check(const ClaimSpec& claim, const VolatilityBand& band, int depth = 10,
                                       int interior = 2) {
    if (auto* c = std::get_if<TerminalB>(&claim)) {
        auto tree = ScenarioTree::make(depth, c->maturity, band, interior);
        return jensen_check(c->name, [c](const State& s) { return c->payoff(s.b); }, tree);
    }
    if (auto* c = std::get_if<TerminalX>(&claim)) {
        auto tree = ScenarioTree::make(depth, c->maturity, band, interior);
        tree.x0 = c->x0;
        return jensen_check(c->name, [c](const State& s) { return c->payoff(s.x); }, tree);
    }
    if (auto* c = std::get_if<TerminalQV>(&claim)) {
        auto tree = ScenarioTree::make(depth, c->maturity, band, interior);
        return jensen_check(c->name, [c](const State& s) { return c->payoff(s.q); }, tree);
    }
    const auto tree = detail::check_tree(claim, band, std::min(depth, 10));
    PathFunctional f{claim_on_path(claim, band, tree.dt())};
    return jensen_check(name_of(claim), f, tree);
}

// E_G[int theta dB * int eta d<B>] <= E_G[int 2G(eta_s int_0^s theta dB) ds]
inline VerificationReport cross_term_estimate(const FeedbackProcess& theta, const FeedbackProcess& eta,
                                              const ScenarioTree& tree, const std::string& name = "cross_term") {
    const double dt = tree.dt();
    const auto& band = tree.band;
    auto t = collect_leaves(tree, 2, [&](std::span<const State> p, double* o) {
        double i = 0.0, a = 0.0, rhs = 0.0, prev = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const PathView v{p.subspan(0, k + 1), dt};
            const double e = eta(v);
            const double f = 2.0 * g_function(e * i, band);
            if (k > 0) rhs += 0.5 * (prev + f) * (p[k].t - p[k - 1].t);
            prev = f;
            if (k + 1 == p.size()) break;
            i += theta(v) * (p[k + 1].b - p[k].b);
            a += e * (p[k + 1].q - p[k].q);
        }
        o[0] = i * a;
        o[1] = rhs;
    });
    const double lhs = reduce_table(t, tree, [](const double* v) { return v[0]; });
    const double rhs = reduce_table(t, tree, [](const double* v) { return v[1]; });
    return at_most_report(name, rhs, lhs, 1e-9 * std::max(1.0, std::abs(rhs)));
}

// (sigma_hi^2 - sigma_lo^2) sigma_hi (2/3) t^{3/2} / sqrt(2 pi)
inline double corollary_bound(double t, const VolatilityBand& band) {
    return band.spread() * band.sigma_hi() * (2.0 / 3.0) * std::pow(t, 1.5) / std::sqrt(2.0 * M_PI);
}

inline std::vector<VerificationReport> corollary_checks(double t, const VolatilityBand& band, int depth = 10,
                                                        int interior = 2) {
    if (depth < 10) throw InputError("corollary checks need tree depth >= 10");
    const auto tree = ScenarioTree::make(depth, t, band, interior);
    const double c = corollary_bound(t, band);
    auto terminal = [&](std::function<double(const State&)> f) {
        MarkovFunctional m;
        m.terminal = std::move(f);
        return g_expectation(m, tree);
    };
    const double b3 = terminal([](const State& s) { return s.b * s.b * s.b; });
    const double bq = terminal([](const State& s) { return s.b * s.q; });
    const double nbq = terminal([](const State& s) { return -s.b * s.q; });
    MarkovFunctional run;
    run.terminal = [](const State&) { return 0.0; };
    run.running = [&band](const State& a, const State& b) {
        return (g_function(a.b, band) + g_function(b.b, band)) * (b.t - a.t);
    };
    const double g2 = g_expectation(run, tree);
    const std::string tag = "@t=" + [&] {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", t);
        return std::string(buf);
    }();
    std::vector<VerificationReport> out;
    out.push_back(equality_report("corollary_a_b3_vs_3bq" + tag, 3.0 * bq, b3, rel_tol(3.0 * bq, b3, 0.02)));
    out.push_back(at_most_report("corollary_b_bq_bound" + tag, c, bq, 1e-9 * std::max(1.0, c)));
    out.push_back(equality_report("corollary_c_running_2g" + tag, c, g2, rel_tol(c, g2, 0.02)));
    out.push_back(equality_report("corollary_d_neg_bq" + tag, c, nbq, rel_tol(c, nbq, 0.02)));
    for (auto& r : out) r.values = {{"closed_form", c}, {"e_b3", b3}, {"e_bq", bq}, {"e_neg_bq", nbq}, {"e_int_2g", g2}};
    return out;
}

struct ConvergenceRow {
    double delta = 0.0;
    double h_distance = 0.0;  // ||H - H_n||_2 under E_G
    double j_n = 0.0;
    double gap = 0.0;
};

struct ConvergenceResult {
    VerificationReport report;
    std::vector<ConvergenceRow> rows;
};

// re-solves H_n = H + delta * perturbation by a grid search over (V0, scale * theta_n)
inline ConvergenceResult convergence_check(const ClaimSpec& claim, double j_star,
                                           const std::function<double(double)>& perturbation,
                                           const std::vector<double>& deltas, const VolatilityBand& band,
                                           const HedgeConfig& cfg = {}, int depth = 8) {
    if (!std::holds_alternative<TerminalB>(claim) && !std::holds_alternative<TerminalQV>(claim))
        throw InputError("convergence check takes terminal payoffs of B or <B>");
    const bool on_q = std::holds_alternative<TerminalQV>(claim);
    const auto tree = detail::check_tree(claim, band, depth);
    const double dt = tree.dt();
    ConvergenceResult out;
    for (double delta : deltas) {
        ClaimSpec hn = claim;
        std::visit(
            [&](auto& c) {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, TerminalB> || std::is_same_v<T, TerminalQV>) {
                    auto f = c.payoff;
                    c.payoff = [f, delta, perturbation](double x) { return f(x) + delta * perturbation(x); };
                }
            },
            hn);
        FeedbackProcess th = FeedbackProcess::constant(0.0);
        if (!on_q) th = extract_decomposition(std::make_shared<const GridFunction>(solve_claim(hn, band, cfg.pde))).theta;
        auto h = claim_on_path(hn, band, dt);
        auto t = collect_leaves(tree, 3, [&](std::span<const State> p, double* o) {
            o[0] = h(p);
            o[1] = th.is_zero() ? 0.0 : detail::gain(th, p, dt);
            o[2] = perturbation(on_q ? p.back().q : p.back().b);
        });
        const double hi = reduce_table(t, tree, [](const double* v) { return v[0]; });
        const double lo = -reduce_table(t, tree, [](const double* v) { return -v[0]; });
        auto j = [&](double v0, double s) { return detail::shifted_risk(t, tree, 1, v0, s); };
        double jn;
        if (th.is_zero()) jn = golden_section([&](double v0) { return j(v0, 0.0); }, lo, hi, 1e-9).f;
        else jn = detail::nested_minimum(j, lo, hi, 0.0, 2.0, 1e-8)[2];
        ConvergenceRow row;
        row.delta = delta;
        row.h_distance = std::abs(delta) * std::sqrt(reduce_table(t, tree, [](const double* v) { return v[2] * v[2]; }));
        row.j_n = jn;
        row.gap = std::abs(jn - j_star);
        out.rows.push_back(row);
    }
    auto& r = out.report;
    r.name = "convergence:" + name_of(claim);
    r.kind = "sequence";
    r.predicted = j_star;
    r.measured = out.rows.empty() ? j_star : out.rows.back().j_n;
    r.tolerance = 0.05 * std::abs(j_star);
    r.passed = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        if (out.rows[i].gap > 1.1 * out.rows[i - 1].gap + 1e-9) {
            r.passed = false;
            r.witness.push_back({"non_monotone_at_delta", out.rows[i].delta});
        }
    if (!out.rows.empty() && out.rows.back().gap > r.tolerance + 1e-12) {
        r.passed = false;
        r.witness.push_back({"final_gap", out.rows.back().gap});
    }
    for (const auto& row : out.rows) {
        char k[48];
        std::snprintf(k, sizeof k, "gap@%g", row.delta);
        r.values.push_back({k, row.gap});
    }
    return out;
}

// portfolios phi* + lambda psi whose distance ||int (theta - phi) dB|| exceeds
// R = sqrt(E_G[H^2]) + sqrt(E_G[(H - int theta dB)^2]) + |V0*| must have J > E_G[H^2]
inline VerificationReport boundedness_check(const ClaimSpec& claim, const VolatilityBand& band,
                                            std::vector<double> scales = {-10, -5, -2, -1, -0.5, 0.5, 1, 2, 5, 10},
                                            const HedgeConfig& cfg = {}, int depth = 8) {
    const auto res = hedge(claim, band, cfg);
    FeedbackProcess theta;
    if (has_pde(claim)) theta = extract_decomposition(std::make_shared<const GridFunction>(solve_claim(claim, band, cfg.pde))).theta;
    else if (auto* d = std::get_if<Decomposed>(&claim)) theta = d->theta;
    else theta = std::get<PiecewiseEta>(claim).theta;
    const auto& phi = res.portfolio.phi_x;
    const auto tree = detail::check_tree(claim, band, depth);
    const double dt = tree.dt();
    auto h = claim_on_path(claim, band, dt);
    auto t = collect_leaves(tree, 4, [&](std::span<const State> p, double* o) {
        o[0] = h(p);
        o[1] = detail::gain(theta, p, dt);
        o[2] = detail::gain(phi, p, dt);
        o[3] = o[2];
    });
    // direction psi = phi*, or a unit exposure when phi* vanishes
    if (reduce_table(t, tree, [](const double* v) { return v[2] * v[2]; }) < 1e-16)
        for (std::size_t i = 0; i < t.size(); ++i) t.data[i * 4 + 3] = 0.0;
    bool unit = false;
    if (reduce_table(t, tree, [](const double* v) { return v[3] * v[3]; }) < 1e-16) {
        unit = true;
        t = collect_leaves(tree, 4, [&](std::span<const State> p, double* o) {
            o[0] = h(p);
            o[1] = detail::gain(theta, p, dt);
            o[2] = detail::gain(phi, p, dt);
            o[3] = p.back().b;
        });
    }
    const double v0 = res.portfolio.v0;
    const double eh2 = reduce_table(t, tree, [](const double* v) { return v[0] * v[0]; });
    const double a = std::sqrt(reduce_table(t, tree, [](const double* v) { return (v[0] - v[1]) * (v[0] - v[1]); }));
    const double radius = std::sqrt(eh2) + a + std::abs(v0);
    auto risk = [&](double l) {
        return reduce_table(t, tree, [&](const double* v) {
            const double r = v[0] - v0 - v[2] - l * v[3];
            return r * r;
        });
    };
    const double j0 = risk(0.0);
    VerificationReport r;
    r.name = "boundedness:" + name_of(claim);
    r.kind = "at_least";
    r.predicted = eh2;
    r.tolerance = 0.0;
    r.passed = j0 < eh2 || eh2 == 0.0;
    double worst_out = std::numeric_limits<double>::infinity();
    int outside = 0;
    for (double l : scales) {
        const double dist = std::sqrt(reduce_table(t, tree, [&](const double* v) {
            const double d = v[1] - v[2] - l * v[3];
            return d * d;
        }));
        const double j = risk(l);
        if (l != 0.0 && !(j > j0)) {
            r.passed = false;
            r.witness.push_back({"not_worse_than_optimum_at_lambda", l});
        }
        if (dist > radius) {
            ++outside;
            worst_out = std::min(worst_out, j);
            if (!(j > eh2)) {
                r.passed = false;
                r.witness.push_back({"inside_bound_at_lambda", l});
            }
        }
    }
    if (outside == 0) {
        r.passed = false;
        r.witness.push_back({"outside_count", 0.0});
    }
    r.measured = outside ? worst_out : 0.0;
    r.values = {{"radius", radius}, {"risk_at_optimum", j0}, {"outside_count", double(outside)}};
    r.notes = unit ? "direction: unit exposure" : "direction: phi*";
    return r;
}

// seeded piecewise-eta claim with |eta_t| = |eta0| + int mu dB, mu constant on each grid interval
struct RandomPiecewise {
    Decomposed claim;
    FeedbackProcess mu;
};

inline RandomPiecewise random_piecewise_claim(std::mt19937_64& rng, double T = 1.0, int intervals = 4,
                                              bool deterministic = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
    const double e0 = 1.0 + u(rng);
    std::vector<double> mus(intervals);
    for (auto& m : mus) m = deterministic ? 0.0 : 0.3 * u(rng) - 0.15;
    const double th0 = 2.0 * u(rng) - 1.0, th1 = u(rng) - 0.5;
    RandomPiecewise r;
    r.claim.grid = TimeGrid::uniform(T, intervals);
    r.claim.mean = 2.0 * u(rng) - 1.0;
    r.claim.name = deterministic ? "random_deterministic_eta" : "random_piecewise_eta";
    const auto g = r.claim.grid;
    auto mu_at = [g, mus](double t, double dt) { return mus[g.interval_of(t + 0.5 * dt)]; };
    r.mu = FeedbackProcess::of_path([mu_at](const PathView& v) { return mu_at(v.now().t, v.dt); });
    r.claim.eta = FeedbackProcess::of_path([mu_at, e0, sign](const PathView& v) {
        double a = e0;
        for (std::size_t k = 0; k + 1 < v.states.size(); ++k)
            a += mu_at(v.states[k].t, v.dt) * (v.states[k + 1].b - v.states[k].b);
        return sign * a;
    });
    if (deterministic) r.claim.eta = FeedbackProcess::constant(sign * e0);
    r.claim.theta = FeedbackProcess::of_tbq([th0, th1](double, double b, double) { return th0 + th1 * b; });
    return r;
}

struct SandwichResult {
    VerificationReport report;
    RiskBounds bounds;
    double j_star = 0.0;
};

// j_lo <= J* <= j_hi with J* the grid-search minimum over (V0, phi = theta + s psi)
inline SandwichResult sandwich_check(const Decomposed& c, const FeedbackProcess& mu, const VolatilityBand& band,
                                     int depth = 8) {
    const auto tree = detail::check_tree(c, band, depth);
    const double dt = tree.dt();
    SandwichResult out;
    out.bounds = risk_bounds(c, band, tree);
    const double ek = out.bounds.expected_k;
    const auto p = bounds_portfolio(c, mu, ek, band);
    const Portfolio mid{c.mean - 0.5 * ek, c.theta, 1.0};
    const auto psi = p.phi_x.plus(c.theta.scaled(-1.0));
    const auto d = to_decomposition(c);
    auto t = collect_leaves(
        tree, 2,
        [&](std::span<const State> path, double* o) {
            o[0] = decomposition_on_path(d, path, dt, band) - path.back().w;
            o[1] = detail::gain(psi, path, dt);
        },
        &mid);
    auto j = [&](double dl, double s) { return detail::shifted_risk(t, tree, 1, dl, s); };
    const double span = std::max(ek, 1e-6);
    const auto m = detail::nested_minimum(j, -span, span, -0.5, 1.5, 1e-8);
    out.j_star = std::min({m[2], j(0.0, 1.0), j(0.0, 0.0)});
    auto& r = out.report;
    r.name = "sandwich:" + c.name;
    r.kind = "between";
    r.predicted = out.bounds.j_hi;
    r.measured = out.j_star;
    r.tolerance = 1e-9 * std::max(1.0, out.bounds.j_hi);
    r.passed = out.bounds.j_lo <= out.j_star + r.tolerance && out.j_star <= out.bounds.j_hi + r.tolerance;
    r.values = {{"j_lo", out.bounds.j_lo}, {"j_hi", out.bounds.j_hi}, {"expected_k", ek},
                {"risk_at_bounds_portfolio", j(0.0, 1.0)}};
    if (!r.passed) r.witness = {{"v0_offset", m[0]}, {"scale", m[1]}, {"risk", m[2]}};
    return out;
}

struct ReconstructionResult {
    VerificationReport report;
    double rms_error = 0.0;
    double rms_claim = 0.0;
    double min_k = 0.0;
    double min_k_increment = 0.0;
};

// H = mean + int theta dB + int eta d<B> - int 2G(eta) ds on every path (left-point sums)
inline ReconstructionResult reconstruction_check(const ClaimSpec& claim, const VolatilityBand& band,
                                                 const HedgeConfig& cfg = {}, int depth = 12) {
    Decomposition d;
    if (has_pde(claim)) d = extract_decomposition(std::make_shared<const GridFunction>(solve_claim(claim, band, cfg.pde)));
    else if (auto* c = std::get_if<Decomposed>(&claim)) d = to_decomposition(*c);
    else d = to_decomposition(std::get<PiecewiseEta>(claim), band);
    const auto tree = detail::check_tree(claim, band, depth);
    if (tree.leaf_count(depth) > max_tree_leaves) throw ResourceError("reconstruction tree too large");
    auto h = claim_on_path(claim, band, tree.dt());
    const auto& sh = shocks_of(tree.scheme);
    const double dt = tree.dt();
    std::vector<State> path(depth + 1);
    path[0] = State{0.0, 0.0, 0.0, tree.x0, 0.0};
    std::vector<double> rec(depth + 1), kk(depth + 1);
    rec[0] = d.mean;
    double se = 0.0, sh2 = 0.0, n = 0.0, min_k = 0.0, min_dk = 0.0;
    std::function<void(int)> walk = [&](int k) {
        if (k == depth) {
            const double hv = h(std::span<const State>(path.data(), path.size()));
            se += (hv - rec[k]) * (hv - rec[k]);
            sh2 += hv * hv;
            n += 1.0;
            return;
        }
        const PathView v{std::span<const State>(path.data(), k + 1), dt};
        const double th = d.theta(v), e = d.eta(v), g2 = 2.0 * g_function(e, band) * dt;
        for (double var : tree.vol_choices)
            for (const auto& s : sh) {
                State& nx = path[k + 1];
                const State& a = path[k];
                const double db = s.z * std::sqrt(var * dt);
                nx.t = tree.time_at(k + 1);
                nx.b = a.b + db;
                nx.q = a.q + var * dt;
                nx.x = tree.x0 * std::exp(nx.b - 0.5 * nx.q);
                const double dk = g2 - e * var * dt;
                rec[k + 1] = rec[k] + th * db + e * var * dt - g2;
                kk[k + 1] = kk[k] + dk;
                min_dk = std::min(min_dk, dk);
                min_k = std::min(min_k, kk[k + 1]);
                walk(k + 1);
            }
    };
    walk(0);
    ReconstructionResult out;
    out.rms_error = std::sqrt(se / n);
    out.rms_claim = std::sqrt(sh2 / n);
    out.min_k = min_k;
    out.min_k_increment = min_dk;
    const double rel = out.rms_error / std::max(out.rms_claim, 1.0);
    auto& r = out.report;
    r = at_most_report("reconstruction:" + name_of(claim), 0.03, rel, 0.0);
    r.passed = r.passed && min_k >= -1e-8 && min_dk >= -1e-8;
    r.values = {{"rms_error", out.rms_error}, {"rms_claim", out.rms_claim}, {"min_k", min_k},
                {"min_k_increment", min_dk}};
    if (!r.passed) r.witness = {{"relative_rms", rel}, {"min_k", min_k}, {"min_k_increment", min_dk}};
    return out;
}

// random terminal payoffs of B for the property suites
inline TerminalB random_terminal_claim(std::mt19937_64& rng, int idx, double T = 1.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a0 = u(rng), a1 = u(rng), a2 = u(rng), a3 = u(rng), a4 = 2.0 * u(rng), a5 = u(rng), k = u(rng);
    TerminalB c;
    c.maturity = T;
    c.name = "random_" + std::to_string(idx);
    c.payoff = [=](double x) { return a0 + a1 * x + a2 * x * x + a3 * std::sin(a4 * x) + a5 * std::max(x - k, 0.0); };
    return c;
}

}  // namespace gexp
