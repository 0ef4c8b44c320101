#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gexp {

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ClassError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// absolute tolerance for path-wise sign checks, relative tolerance for oracle comparisons
inline constexpr double path_tol = 1e-9;
inline constexpr double oracle_rel_tol = 0.02;

struct VolatilityBand {
    double var_lo = 1.0;
    double var_hi = 4.0;

    VolatilityBand() = default;
    VolatilityBand(double lo, double hi) : var_lo(lo), var_hi(hi) { validate(); }

    void validate() const {
        if (!(std::isfinite(var_lo) && std::isfinite(var_hi) && var_lo > 0.0 && var_lo <= var_hi))
            throw InputError("volatility band needs 0 < var_lo <= var_hi");
    }
    double sigma_lo() const { return std::sqrt(var_lo); }
    double sigma_hi() const { return std::sqrt(var_hi); }
    double spread() const { return var_hi - var_lo; }
    bool degenerate() const { return spread() <= 1e-14 * var_hi; }
};

// G(y) = 1/2 var_hi y^+ - 1/2 var_lo y^-
inline double g_function(double y, const VolatilityBand& band) {
    return 0.5 * band.var_hi * std::max(y, 0.0) - 0.5 * band.var_lo * std::max(-y, 0.0);
}

struct TimeGrid {
    std::vector<double> knots;

    TimeGrid() : knots{0.0, 1.0} {}
    explicit TimeGrid(std::vector<double> k) : knots(std::move(k)) { validate(); }

    static TimeGrid uniform(double T, int n) {
        if (n < 1) throw InputError("time grid needs at least one interval");
        std::vector<double> k(n + 1);
        for (int i = 0; i <= n; ++i) k[i] = T * i / n;
        k[n] = T;
        return TimeGrid(std::move(k));
    }

    void validate() const {
        if (knots.size() < 2) throw InputError("time grid needs at least two knots");
        if (knots.front() != 0.0) throw InputError("time grid must start at 0");
        for (std::size_t i = 1; i < knots.size(); ++i)
            if (!(knots[i] > knots[i - 1])) throw InputError("time grid knots must increase strictly");
        if (!std::isfinite(knots.back())) throw InputError("time grid maturity not finite");
    }
    double maturity() const { return knots.back(); }
    std::size_t intervals() const { return knots.size() - 1; }

    // index i such that t lies in (t_i, t_{i+1}]; t <= 0 maps to the first interval
    std::size_t interval_of(double t) const {
        const double eps = 1e-12 * std::max(1.0, maturity());
        for (std::size_t i = 1; i + 1 < knots.size(); ++i)
            if (t <= knots[i] + eps) return i - 1;
        return knots.size() - 2;
    }
};

// one node of a scenario path; x is the risky asset, w the hedger's wealth
struct State {
    double t = 0.0;
    double b = 0.0;
    double q = 0.0;
    double x = 1.0;
    double w = 0.0;
};

// path seen from its last node; anchors of piecewise processes are looked up by time
struct PathView {
    std::span<const State> states;
    double dt = 0.0;

    const State& now() const { return states.back(); }
    std::size_t step() const { return states.size() - 1; }
    const State& at_time(double t) const {
        const double eps = 1e-9 * std::max(1.0, std::abs(t));
        for (std::size_t i = states.size(); i-- > 0;)
            if (states[i].t <= t + eps) return states[i];
        return states.front();
    }
};

enum class FeedbackKind { Deterministic, OfQ, OfTBQ, Piecewise };

class FeedbackProcess {
public:
    using Fn = std::function<double(const PathView&)>;

    FeedbackProcess() : FeedbackProcess(constant(0.0)) {}
    FeedbackProcess(FeedbackKind kind, Fn fn, std::optional<double> c = std::nullopt)
        : kind_(kind), fn_(std::move(fn)), const_(c) {}

    static FeedbackProcess constant(double c) {
        return {FeedbackKind::Deterministic, [c](const PathView&) { return c; }, c};
    }
    static FeedbackProcess of_t(std::function<double(double)> f) {
        return {FeedbackKind::Deterministic, [f = std::move(f)](const PathView& p) { return f(p.now().t); }};
    }
    static FeedbackProcess of_q(std::function<double(double, double)> f) {
        return {FeedbackKind::OfQ, [f = std::move(f)](const PathView& p) { return f(p.now().t, p.now().q); }};
    }
    static FeedbackProcess of_tbq(std::function<double(double, double, double)> f) {
        return {FeedbackKind::OfTBQ,
                [f = std::move(f)](const PathView& p) { return f(p.now().t, p.now().b, p.now().q); }};
    }
    // general path-dependent evaluator (running integrals etc.)
    static FeedbackProcess of_path(Fn f) { return {FeedbackKind::OfTBQ, std::move(f)}; }

    // on (t_i, t_{i+1}] the value is f evaluated at the path state at t_i
    static FeedbackProcess piecewise(const TimeGrid& grid, std::function<double(std::size_t, const State&)> f) {
        return {FeedbackKind::Piecewise, [grid, f = std::move(f)](const PathView& p) {
                    const std::size_t i = grid.interval_of(p.now().t + 0.5 * p.dt);
                    return f(i, p.at_time(grid.knots[i]));
                }};
    }
    // piece i drives (t_i, t_{i+1}]
    static FeedbackProcess splice(const TimeGrid& grid, std::vector<FeedbackProcess> pieces) {
        if (pieces.size() != grid.intervals()) throw InputError("splice needs one piece per interval");
        FeedbackKind k = FeedbackKind::Deterministic;
        bool all_piecewise = true;
        for (const auto& pc : pieces) {
            if (pc.kind() != FeedbackKind::Piecewise) all_piecewise = false;
            if (pc.kind() == FeedbackKind::OfTBQ || pc.kind() == FeedbackKind::Piecewise) k = FeedbackKind::OfTBQ;
            else if (pc.kind() == FeedbackKind::OfQ && k == FeedbackKind::Deterministic) k = FeedbackKind::OfQ;
        }
        if (all_piecewise) k = FeedbackKind::Piecewise;
        return {k, [grid, pieces = std::move(pieces)](const PathView& p) {
                    return pieces[grid.interval_of(p.now().t + 0.5 * p.dt)](p);
                }};
    }

    FeedbackKind kind() const { return kind_; }
    std::optional<double> constant_value() const { return const_; }
    bool is_zero() const { return const_ && *const_ == 0.0; }

    double operator()(const PathView& p) const { return fn_(p); }
    double operator()(double t, double b, double q, double x = 1.0) const {
        State s{t, b, q, x, 0.0};
        return fn_(PathView{std::span<const State>(&s, 1), 0.0});
    }

    FeedbackProcess scaled(double a) const {
        if (const_) return constant(a * *const_);
        return {kind_, [f = fn_, a](const PathView& p) { return a * f(p); }};
    }
    FeedbackProcess plus(const FeedbackProcess& o) const {
        if (const_ && o.const_) return constant(*const_ + *o.const_);
        const FeedbackKind k = std::max(kind_, o.kind_);
        return {k, [f = fn_, g = o.fn_](const PathView& p) { return f(p) + g(p); }};
    }

private:
    FeedbackKind kind_;
    Fn fn_;
    std::optional<double> const_;
};

using Payoff = std::function<double(double)>;

struct TerminalB {
    Payoff payoff;
    double maturity = 1.0;
    std::string name = "custom";
};
struct TerminalX {
    Payoff payoff;
    double x0 = 1.0;
    double maturity = 1.0;
    std::string name = "custom";
};
struct TerminalQV {
    Payoff payoff;
    double maturity = 1.0;
    std::string name = "custom";
};
struct Decomposed {
    double mean = 0.0;
    FeedbackProcess theta;
    FeedbackProcess eta;
    TimeGrid grid;
    std::string name = "decomposed";
};

// eta = eta0 on (t0,t1], eta1_sign * |eta_{t1}| on (t1,t2] with
// |eta_{t1}| = abs_eta1_mean + int mu dB + xi0 dq - 2G(xi0) dt on [0,t1]
struct PiecewiseEta {
    FeedbackProcess theta;
    double eta0 = 0.0;
    double abs_eta1_mean = 0.0;
    std::optional<FeedbackProcess> mu;
    double xi0 = 0.0;
    TimeGrid grid{{0.0, 0.5, 1.0}};
    double mean = 0.0;
    double eta1_sign = 1.0;
    // optional exact |eta_{t1}| as a function of the state at t1
    std::function<double(const State&)> abs_eta1_closed;
    std::string name = "piecewise_eta";

    double t1() const { return grid.knots.at(1); }
    double maturity() const { return grid.knots.at(2); }
    void validate() const {
        if (grid.knots.size() != 3) throw InputError("piecewise eta needs a 3-knot grid");
        if (!mu && !abs_eta1_closed && abs_eta1_mean != 0.0)
            throw InputError("piecewise eta needs mu or a closed form for |eta_t1|");
    }
};

using ClaimSpec = std::variant<TerminalB, TerminalX, TerminalQV, Decomposed, PiecewiseEta>;

inline double maturity_of(const ClaimSpec& c) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Decomposed>) return v.grid.maturity();
            else if constexpr (std::is_same_v<T, PiecewiseEta>) return v.maturity();
            else return v.maturity;
        },
        c);
}

inline std::string name_of(const ClaimSpec& c) {
    return std::visit([](const auto& v) { return v.name; }, c);
}

inline double x0_of(const ClaimSpec& c) {
    if (auto* p = std::get_if<TerminalX>(&c)) return p->x0;
    return 1.0;
}

struct Decomposition {
    double mean = 0.0;
    FeedbackProcess theta;
    FeedbackProcess eta;
    TimeGrid grid;
    // set when a grid-backed evaluator had to clamp outside its domain
    std::shared_ptr<bool> clamped = std::make_shared<bool>(false);
};

// wealth V_t = v0 + int phi dX; phi_x holds the exposure phi_t X_t
struct Portfolio {
    double v0 = 0.0;
    FeedbackProcess phi_x;
    double x0 = 1.0;

    double units(double t, double b, double q) const {
        const double x = x0 * std::exp(b - 0.5 * q);
        return phi_x(t, b, q, x) / x;
    }
};

// |eta_{t1}| along a path reaching t1
inline double abs_eta1_on_path(const PiecewiseEta& c, std::span<const State> path, double dt,
                               const VolatilityBand& band) {
    const double t1 = c.t1();
    PathView full{path, dt};
    const State& s1 = full.at_time(t1);
    if (c.abs_eta1_closed) return c.abs_eta1_closed(s1);
    double v = c.abs_eta1_mean + c.xi0 * s1.q - 2.0 * g_function(c.xi0, band) * t1;
    if (c.mu) {
        if (auto mc = c.mu->constant_value()) return v + *mc * s1.b;
        for (std::size_t k = 0; k + 1 < path.size() && path[k].t < t1 - 1e-12; ++k)
            v += (*c.mu)(PathView{path.subspan(0, k + 1), dt}) * (path[k + 1].b - path[k].b);
    }
    return v;
}

inline Decomposition to_decomposition(const PiecewiseEta& c, const VolatilityBand& band) {
    c.validate();
    Decomposition d;
    d.mean = c.mean;
    d.theta = c.theta;
    d.grid = c.grid;
    const double eta0 = c.eta0;
    d.eta = FeedbackProcess(FeedbackKind::Piecewise, [c, band, eta0](const PathView& p) {
        if (p.now().t + 0.5 * p.dt <= c.t1() + 1e-12) return eta0;
        std::size_t n = 0;
        while (n < p.states.size() && p.states[n].t <= c.t1() + 1e-9) ++n;
        return c.eta1_sign * abs_eta1_on_path(c, p.states.subspan(0, n), p.dt, band);
    });
    return d;
}

inline Decomposition to_decomposition(const Decomposed& c) {
    Decomposition d;
    d.mean = c.mean;
    d.theta = c.theta;
    d.eta = c.eta;
    d.grid = c.grid;
    return d;
}

// Ito reconstruction mean + sum theta dB + sum (eta dq - 2G(eta) dt), left-point
inline double decomposition_on_path(const Decomposition& d, std::span<const State> path, double dt,
                                    const VolatilityBand& band) {
    double h = d.mean;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        PathView pv{path.subspan(0, k + 1), dt};
        const double h_t = path[k + 1].t - path[k].t;
        const double e = d.eta(pv);
        h += d.theta(pv) * (path[k + 1].b - path[k].b) + e * (path[k + 1].q - path[k].q) -
             2.0 * g_function(e, band) * h_t;
    }
    return h;
}

inline void check_admissible(std::span<const State> path, const VolatilityBand& band) {
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const double h = path[k + 1].t - path[k].t;
        if (!(h > 0.0)) throw InputError("path times must increase");
        const double slope = (path[k + 1].q - path[k].q) / h;
        const double slack = 1e-9 * std::max(1.0, band.var_hi);
        if (slope < band.var_lo - slack || slope > band.var_hi + slack)
            throw InputError("quadratic variation slope outside the band");
    }
}

// cumulative K_t at every node of the path; K_0 = 0
inline std::vector<double> k_profile(const FeedbackProcess& eta, std::span<const State> path,
                                     const VolatilityBand& band, double dt = 0.0) {
    check_admissible(path, band);
    std::vector<double> k(path.size(), 0.0);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const double e = eta(PathView{path.subspan(0, i + 1), dt});
        const double h = path[i + 1].t - path[i].t;
        k[i + 1] = k[i] + 2.0 * g_function(e, band) * h - e * (path[i + 1].q - path[i].q);
    }
    return k;
}

inline double k_along_path(const FeedbackProcess& eta, std::span<const State> path, const VolatilityBand& band,
                           double dt = 0.0) {
    return k_profile(eta, path, band, dt).back();
}

// single-step eta on (t,T]: eta_bar fixed at t, |eta_bar| = abs_mean + int mu dB + int xi dq - 2 int G(xi) ds
struct StepEta {
    double mean = 0.0;
    FeedbackProcess theta;
    double t = 0.5;
    double maturity = 1.0;
    std::function<double(const State&)> eta_bar;
    double abs_mean = 0.0;
    FeedbackProcess mu;
    FeedbackProcess xi;
};

struct NegatedStep {
    Decomposition d;
    FeedbackProcess mu_bar;
    FeedbackProcess xi_bar;
};

inline NegatedStep negate_decomposition(const StepEta& s, const VolatilityBand& band) {
    if (!(s.t > 0.0 && s.t < s.maturity) || !s.eta_bar)
        throw InputError("negation needs eta of single-step form on (t,T]");
    const TimeGrid g({0.0, s.t, s.maturity});
    const double y = band.spread() * (s.maturity - s.t);
    NegatedStep out;
    out.mu_bar = FeedbackProcess::splice(g, {s.mu.scaled(y).plus(s.theta.scaled(-1.0)), s.theta.scaled(-1.0)});
    auto eb = s.eta_bar;
    auto frozen = FeedbackProcess::piecewise(g, [eb](std::size_t, const State& at) { return -eb(at); });
    out.xi_bar = FeedbackProcess::splice(g, {s.xi.scaled(y), frozen});
    out.d.mean = -s.mean + y * s.abs_mean;
    out.d.theta = out.mu_bar;
    out.d.eta = out.xi_bar;
    out.d.grid = g;
    return out;
}

// plain sign flip of a decomposition (valid for the symmetric part only)
inline Decomposition flip(const Decomposition& d) {
    Decomposition o = d;
    o.mean = -d.mean;
    o.theta = d.theta.scaled(-1.0);
    o.eta = d.eta.scaled(-1.0);
    return o;
}

enum class HedgeClass { SymmetricReplicable, DeterministicEta, MaximalEta, OneStep, TwoStepRecursive, GeneralBoundsOnly };

inline std::string to_string(HedgeClass c) {
    switch (c) {
        case HedgeClass::SymmetricReplicable: return "symmetric_replicable";
        case HedgeClass::DeterministicEta: return "deterministic_eta";
        case HedgeClass::MaximalEta: return "maximal_eta";
        case HedgeClass::OneStep: return "one_step";
        case HedgeClass::TwoStepRecursive: return "two_step_recursive";
        case HedgeClass::GeneralBoundsOnly: return "general_bounds_only";
    }
    return "general_bounds_only";
}

// sampled check; the sample box covers +-3 sigma_hi sqrt(T) in b and the admissible q range
inline HedgeClass classify(const ClaimSpec& claim, const Decomposition& d, const VolatilityBand& band,
                           double tol = 1e-6) {
    if (band.degenerate()) return HedgeClass::SymmetricReplicable;
    if (auto* pe = std::get_if<PiecewiseEta>(&claim)) {
        if (pe->eta0 == 0.0 && pe->abs_eta1_mean == 0.0 && !pe->abs_eta1_closed) return HedgeClass::SymmetricReplicable;
        if (pe->eta0 == 0.0 && !pe->mu) return HedgeClass::OneStep;
        return HedgeClass::TwoStepRecursive;
    }
    const double T = d.grid.maturity();
    const double x0 = x0_of(claim);
    const bool in_x = std::holds_alternative<TerminalX>(claim);
    const double bw = 3.0 * band.sigma_hi() * std::sqrt(T);
    double max_abs = 0.0, var_b = 0.0, var_q = 0.0, scale = 0.0;
    const int nt = 6, nb = 9, nq = 5;
    for (int it = 0; it < nt; ++it) {
        const double t = T * (it + 0.5) / nt;
        double ref = std::numeric_limits<double>::quiet_NaN();
        for (int iq = 0; iq < nq; ++iq) {
            const double q = t * (band.var_lo + band.spread() * iq / (nq - 1));
            double ref_q = std::numeric_limits<double>::quiet_NaN();
            for (int ib = 0; ib < nb; ++ib) {
                const double b = -bw + 2.0 * bw * ib / (nb - 1);
                const double x = in_x ? x0 * std::exp(b - 0.5 * q) : 1.0;
                const double e = d.eta(t, b, q, x);
                max_abs = std::max(max_abs, std::abs(e));
                scale = std::max(scale, std::abs(e));
                if (std::isnan(ref_q)) ref_q = e;
                var_b = std::max(var_b, std::abs(e - ref_q));
                if (ib == nb / 2) {
                    if (std::isnan(ref)) ref = e;
                    var_q = std::max(var_q, std::abs(e - ref));
                }
            }
        }
    }
    const double thr = tol * std::max(1.0, scale);
    if (max_abs <= tol) return HedgeClass::SymmetricReplicable;
    if (var_b <= thr && var_q <= thr) return HedgeClass::DeterministicEta;
    if (var_b <= thr) return HedgeClass::MaximalEta;
    return HedgeClass::GeneralBoundsOnly;
}

}  // namespace gexp
