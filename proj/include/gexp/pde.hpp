#pragma once

#include <ostream>

#include "core.hpp"

namespace gexp {

enum class GridKind { B, X, QV };

struct SolverConfig {
    double dx = 0.0;              // 0: derived from nodes
    int nodes = 1200;
    double half_width_mult = 6.0;  // in units of sigma_hi sqrt(T)
    bool auto_cfl = true;
    double cfl = 0.9;
    double dt = 0.0;              // only read when auto_cfl is off
    int slices = 201;             // stored time slices
    double x_lo = 0.0;            // explicit x-domain for solve_bsb_x (both 0: automatic)
    double x_hi = 0.0;
};

struct GridFunction {
    GridKind kind = GridKind::B;
    double maturity = 1.0;
    double start = 0.0;
    double dt = 0.0;
    int steps = 0;
    std::vector<double> times;  // uniform stored slices on [0,T]
    std::vector<double> space;
    std::vector<std::vector<double>> values, d1, d2;

    double u0() const { return at(values, 0.0, start, nullptr); }
    double value(double t, double x, bool* clamped = nullptr) const { return at(values, t, x, clamped); }
    double first(double t, double x, bool* clamped = nullptr) const { return at(d1, t, x, clamped); }
    double second(double t, double x, bool* clamped = nullptr) const { return at(d2, t, x, clamped); }

private:
    double at(const std::vector<std::vector<double>>& f, double t, double x, bool* clamped) const {
        if (x < space.front() || x > space.back()) {
            if (clamped) *clamped = true;
            x = std::clamp(x, space.front(), space.back());
        }
        auto it = std::upper_bound(space.begin(), space.end(), x);
        std::size_t j = it == space.begin() ? 0 : std::size_t(it - space.begin()) - 1;
        if (j + 1 >= space.size()) j = space.size() - 2;
        const double wx = (x - space[j]) / (space[j + 1] - space[j]);
        const double tau = std::clamp(t, 0.0, maturity) / maturity * double(times.size() - 1);
        std::size_t i = std::min(std::size_t(tau), times.size() - 2);
        const double wt = tau - double(i);
        auto lin = [&](std::size_t s) { return (1.0 - wx) * f[s][j] + wx * f[s][j + 1]; };
        return (1.0 - wt) * lin(i) + wt * lin(i + 1);
    }
};

namespace detail {

inline void check_payoff(const std::vector<double>& u) {
    for (double v : u)
        if (!std::isfinite(v)) throw InputError("payoff is not finite on the solver domain");
}

// first and second differences on a non-uniform grid; exact for quadratics
inline void differentiate(const std::vector<double>& x, const std::vector<double>& u, std::vector<double>& d1,
                          std::vector<double>& d2) {
    const std::size_t n = x.size();
    d1.assign(n, 0.0);
    d2.assign(n, 0.0);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double hm = x[j] - x[j - 1], hp = x[j + 1] - x[j];
        d1[j] = (hm * hm * u[j + 1] - hp * hp * u[j - 1] + (hp * hp - hm * hm) * u[j]) / (hp * hm * (hp + hm));
        d2[j] = 2.0 * ((u[j + 1] - u[j]) / hp - (u[j] - u[j - 1]) / hm) / (hp + hm);
    }
    // one-sided at the edges
    d1[0] = (u[1] - u[0]) / (x[1] - x[0]);
    d1[n - 1] = (u[n - 1] - u[n - 2]) / (x[n - 1] - x[n - 2]);
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
}

// backward explicit scheme for u_t + G(w(x) u_xx) = 0 with the Barenblatt switch
inline GridFunction solve_barenblatt(const std::vector<double>& x, const std::vector<double>& weight,
                                     const Payoff& payoff, const VolatilityBand& band, double T,
                                     const SolverConfig& cfg) {
    const std::size_t n = x.size();
    if (n < 5) throw ConfigError("grid too small");
    double dt_max = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j + 1 < n; ++j)
        dt_max = std::min(dt_max, (x[j] - x[j - 1]) * (x[j + 1] - x[j]) / (band.var_hi * weight[j]));
    double dt0 = cfg.auto_cfl ? cfg.cfl * dt_max : cfg.dt;
    if (!cfg.auto_cfl && !(cfg.dt > 0.0 && cfg.dt <= dt_max * (1.0 + 1e-12)))
        throw ConfigError("time step violates the stability bound dx^2/var_hi");
    long nmin = std::max(1L, long(std::ceil(T / dt0 - 1e-9)));
    const long nsl = std::max(1L, std::min<long>(cfg.slices - 1, nmin));
    const long stride = (nmin + nsl - 1) / nsl;
    const long steps = stride * nsl;
    const double dt = T / double(steps);

    GridFunction g;
    g.maturity = T;
    g.dt = dt;
    g.steps = int(steps);
    g.space = x;
    g.times.resize(nsl + 1);
    for (long i = 0; i <= nsl; ++i) g.times[i] = T * double(i) / double(nsl);
    g.values.assign(nsl + 1, {});

    std::vector<double> u(n), un(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = payoff(x[j]);
    check_payoff(u);
    g.values[nsl] = u;
    for (long s = steps - 1; s >= 0; --s) {
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double hm = x[j] - x[j - 1], hp = x[j + 1] - x[j];
            const double dxx = 2.0 * ((u[j + 1] - u[j]) / hp - (u[j] - u[j - 1]) / hm) / (hp + hm);
            un[j] = u[j] + dt * g_function(weight[j] * dxx, band);
        }
        // zero second derivative at both ends
        un[0] = un[1] - (x[1] - x[0]) * (un[2] - un[1]) / (x[2] - x[1]);
        un[n - 1] = un[n - 2] + (x[n - 1] - x[n - 2]) * (un[n - 2] - un[n - 3]) / (x[n - 2] - x[n - 3]);
        std::swap(u, un);
        if (s % stride == 0) g.values[s / stride] = u;
    }
    g.d1.resize(g.values.size());
    g.d2.resize(g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) differentiate(x, g.values[i], g.d1[i], g.d2[i]);
    return g;
}

}  // namespace detail

inline GridFunction solve_bsb_b(const Payoff& payoff, const VolatilityBand& band, double T,
                                const SolverConfig& cfg = {}) {
    band.validate();
    if (!(T > 0.0)) throw InputError("maturity must be positive");
    if (cfg.half_width_mult < 6.0) throw ConfigError("domain half-width below 6 sigma_hi sqrt(T)");
    const double L = cfg.half_width_mult * band.sigma_hi() * std::sqrt(T);
    const int intervals = cfg.dx > 0.0 ? int(std::ceil(2.0 * L / cfg.dx)) : cfg.nodes;
    std::vector<double> x(intervals + 1), w(intervals + 1, 1.0);
    for (int j = 0; j <= intervals; ++j) x[j] = -L + 2.0 * L * j / intervals;
    auto g = detail::solve_barenblatt(x, w, payoff, band, T, cfg);
    g.kind = GridKind::B;
    g.start = 0.0;
    return g;
}

// log-spaced grid in x, diffusion coefficient G(x^2 u_xx)
inline GridFunction solve_bsb_x(const Payoff& payoff, double x0, const VolatilityBand& band, double T,
                                const SolverConfig& cfg = {}) {
    band.validate();
    if (!(x0 > 0.0)) throw InputError("X0 must be positive");
    if (!(T > 0.0)) throw InputError("maturity must be positive");
    double zlo, zhi;
    if (cfg.x_lo != 0.0 || cfg.x_hi != 0.0) {
        if (!(cfg.x_lo > 0.0) || !(cfg.x_hi > cfg.x_lo)) throw ConfigError("x-domain must lie inside (0, inf)");
        zlo = std::log(cfg.x_lo);
        zhi = std::log(cfg.x_hi);
    } else {
        if (cfg.half_width_mult < 6.0) throw ConfigError("domain half-width below 6 sigma_hi sqrt(T)");
        const double s = band.sigma_hi() * std::sqrt(T);
        zlo = std::log(x0) - cfg.half_width_mult * s - 0.5 * band.var_hi * T;
        zhi = std::log(x0) + cfg.half_width_mult * s;
    }
    const int intervals = cfg.dx > 0.0 ? int(std::ceil((zhi - zlo) / cfg.dx)) : cfg.nodes;
    std::vector<double> x(intervals + 1), w(intervals + 1);
    for (int j = 0; j <= intervals; ++j) {
        x[j] = std::exp(zlo + (zhi - zlo) * j / intervals);
        w[j] = x[j] * x[j];
    }
    auto g = detail::solve_barenblatt(x, w, payoff, band, T, cfg);
    g.kind = GridKind::X;
    g.start = x0;
    return g;
}

// u_t + max_v v u_q = 0, upwind in q
inline GridFunction solve_qv_hjb(const Payoff& payoff, const VolatilityBand& band, double T,
                                 const SolverConfig& cfg = {}) {
    band.validate();
    if (!(T > 0.0)) throw InputError("maturity must be positive");
    const double qmax = 1.1 * band.var_hi * T;
    const int intervals = cfg.dx > 0.0 ? int(std::ceil(qmax / cfg.dx)) : std::max(cfg.nodes, 2000);
    const double dq = qmax / intervals;
    const double dt_max = dq / band.var_hi;
    const double dt0 = cfg.auto_cfl ? cfg.cfl * dt_max : cfg.dt;
    if (!cfg.auto_cfl && !(cfg.dt > 0.0 && cfg.dt <= dt_max * (1.0 + 1e-12)))
        throw ConfigError("time step violates the bound dq/var_hi");
    const long nmin = std::max(1L, long(std::ceil(T / dt0 - 1e-9)));
    const long nsl = std::max(1L, std::min<long>(cfg.slices - 1, nmin));
    const long stride = (nmin + nsl - 1) / nsl;
    const long steps = stride * nsl;
    const double dt = T / double(steps);

    GridFunction g;
    g.kind = GridKind::QV;
    g.maturity = T;
    g.start = 0.0;
    g.dt = dt;
    g.steps = int(steps);
    g.space.resize(intervals + 1);
    for (int j = 0; j <= intervals; ++j) g.space[j] = qmax * j / intervals;
    g.times.resize(nsl + 1);
    for (long i = 0; i <= nsl; ++i) g.times[i] = T * double(i) / double(nsl);
    g.values.assign(nsl + 1, {});
    const std::size_t n = g.space.size();
    std::vector<double> u(n), un(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = payoff(g.space[j]);
    detail::check_payoff(u);
    g.values[nsl] = u;
    for (long s = steps - 1; s >= 0; --s) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = j + 1 < n ? (u[j + 1] - u[j]) / dq : (u[j] - u[j - 1]) / dq;
            un[j] = u[j] + dt * std::max(band.var_lo * d, band.var_hi * d);
        }
        std::swap(u, un);
        if (s % stride == 0) g.values[s / stride] = u;
    }
    g.d1.resize(g.values.size());
    g.d2.resize(g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        detail::differentiate(g.space, g.values[i], g.d1[i], g.d2[i]);
        // forward differences in q, matching the upwind direction
        for (std::size_t j = 0; j + 1 < n; ++j) g.d1[i][j] = (g.values[i][j + 1] - g.values[i][j]) / dq;
    }
    return g;
}

// theta = u_x (x u_x for X claims), eta = 1/2 u_xx (1/2 x^2 u_xx), eta = u_q for <B> claims
inline Decomposition extract_decomposition(std::shared_ptr<const GridFunction> u) {
    Decomposition d;
    d.mean = u->u0();
    d.grid = TimeGrid({0.0, u->maturity});
    auto flag = d.clamped;
    switch (u->kind) {
        case GridKind::B:
            d.theta = FeedbackProcess(FeedbackKind::OfTBQ, [u, flag](const PathView& p) {
                bool c = false;
                const double v = u->first(p.now().t, p.now().b, &c);
                if (c) *flag = true;
                return v;
            });
            d.eta = FeedbackProcess(FeedbackKind::OfTBQ, [u, flag](const PathView& p) {
                bool c = false;
                const double v = 0.5 * u->second(p.now().t, p.now().b, &c);
                if (c) *flag = true;
                return v;
            });
            break;
        case GridKind::X:
            d.theta = FeedbackProcess(FeedbackKind::OfTBQ, [u, flag](const PathView& p) {
                bool c = false;
                const double x = p.now().x;
                const double v = x * u->first(p.now().t, x, &c);
                if (c) *flag = true;
                return v;
            });
            d.eta = FeedbackProcess(FeedbackKind::OfTBQ, [u, flag](const PathView& p) {
                bool c = false;
                const double x = p.now().x;
                const double v = 0.5 * x * x * u->second(p.now().t, x, &c);
                if (c) *flag = true;
                return v;
            });
            break;
        case GridKind::QV:
            d.theta = FeedbackProcess::constant(0.0);
            d.eta = FeedbackProcess(FeedbackKind::OfQ, [u, flag](const PathView& p) {
                bool c = false;
                const double v = u->first(p.now().t, p.now().q, &c);
                if (c) *flag = true;
                return v;
            });
            break;
    }
    return d;
}

inline Decomposition extract_decomposition(const GridFunction& u) {
    return extract_decomposition(std::make_shared<const GridFunction>(u));
}

inline void write_grid_csv(const GridFunction& g, std::ostream& os) {
    os << "t,x,u,theta,eta\n";
    char buf[256];
    for (std::size_t i = 0; i < g.times.size(); ++i)
        for (std::size_t j = 0; j < g.space.size(); ++j) {
            const double x = g.space[j];
            double th = g.d1[i][j], et = 0.5 * g.d2[i][j];
            if (g.kind == GridKind::X) {
                th *= x;
                et *= x * x;
            } else if (g.kind == GridKind::QV) {
                th = 0.0;
                et = g.d1[i][j];
            }
            std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", g.times[i], x, g.values[i][j], th, et);
            os << buf;
        }
}

// PDE solve for a terminal claim (sign = -1 prices -H)
inline GridFunction solve_claim(const ClaimSpec& claim, const VolatilityBand& band, const SolverConfig& cfg = {},
                                double sign = 1.0) {
    if (auto* c = std::get_if<TerminalB>(&claim))
        return solve_bsb_b([p = c->payoff, sign](double x) { return sign * p(x); }, band, c->maturity, cfg);
    if (auto* c = std::get_if<TerminalX>(&claim))
        return solve_bsb_x([p = c->payoff, sign](double x) { return sign * p(x); }, c->x0, band, c->maturity, cfg);
    if (auto* c = std::get_if<TerminalQV>(&claim))
        return solve_qv_hjb([p = c->payoff, sign](double x) { return sign * p(x); }, band, c->maturity, cfg);
    throw InputError("no PDE for this claim kind");
}

inline bool has_pde(const ClaimSpec& c) {
    return std::holds_alternative<TerminalB>(c) || std::holds_alternative<TerminalX>(c) ||
           std::holds_alternative<TerminalQV>(c);
}

}  // namespace gexp
