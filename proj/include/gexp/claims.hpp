#pragma once

#include <map>

#include "core.hpp"

namespace gexp {

struct PayoffParams {
    double strike = 0.0;
    double scale = 1.0;
    std::vector<std::pair<double, double>> table;  // for "tabulated"
};

// linear interpolation, flat extrapolation of the slope at both ends
inline Payoff tabulated_payoff(std::vector<std::pair<double, double>> t) {
    if (t.size() < 2) throw InputError("tabulated payoff needs two points");
    std::sort(t.begin(), t.end());
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i].first > t[i - 1].first)) throw InputError("tabulated payoff abscissae must differ");
    return [t](double x) {
        std::size_t j = 0;
        if (x >= t.back().first) j = t.size() - 2;
        else if (x > t.front().first)
            j = std::size_t(std::upper_bound(t.begin(), t.end(), std::make_pair(x, -1e308)) - t.begin()) - 1;
        const auto [x0, y0] = t[j];
        const auto [x1, y1] = t[j + 1];
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    };
}

inline Payoff builtin_payoff(const std::string& name, const PayoffParams& p = {}) {
    const double k = p.strike, a = p.scale;
    if (name == "identity") return [a, k](double x) { return a * (x - k); };
    if (name == "neg_identity") return [a, k](double x) { return -a * (x - k); };
    if (name == "square") return [a](double x) { return a * x * x; };
    if (name == "neg_square") return [a](double x) { return -a * x * x; };
    if (name == "abs") return [a, k](double x) { return a * std::abs(x - k); };
    if (name == "call") return [a, k](double x) { return a * std::max(x - k, 0.0); };
    if (name == "put") return [a, k](double x) { return a * std::max(k - x, 0.0); };
    if (name == "cube") return [a](double x) { return a * x * x * x; };
    if (name == "sin") return [a](double x) { return a * std::sin(x); };
    if (name == "exp") return [a](double x) { return a * std::exp(x); };
    if (name == "log") return [a](double x) { return a * std::log(x); };
    if (name == "neg_log") return [a](double x) { return -a * std::log(x); };
    if (name == "sqrt_qv") return [a, k](double q) { return a * (std::sqrt(std::max(q, 0.0)) - k); };
    if (name == "qv") return [a, k](double q) { return a * (q - k); };
    if (name == "neg_qv") return [a, k](double q) { return -a * (q - k); };
    if (name == "tabulated") return tabulated_payoff(p.table);
    throw InputError("unknown payoff '" + name + "'");
}

// sampled growth check |f(x)| <= C (1 + |x|^k) over [lo, hi]
inline bool growth_ok(const Payoff& f, double lo, double hi, int k = 4, double c = 1e6) {
    for (int i = 0; i <= 200; ++i) {
        const double x = lo + (hi - lo) * i / 200.0;
        const double v = f(x);
        if (!std::isfinite(v) || std::abs(v) > c * (1.0 + std::pow(std::abs(x), k))) return false;
    }
    return true;
}

// the builtin payoff suite: x, x^2, -x^2, |x|, (x-1)+, log X, q, sqrt(q)-1, -q
inline std::vector<ClaimSpec> builtin_suite(double T = 1.0) {
    std::vector<ClaimSpec> v;
    v.push_back(TerminalB{builtin_payoff("identity"), T, "x"});
    v.push_back(TerminalB{builtin_payoff("square"), T, "x^2"});
    v.push_back(TerminalB{builtin_payoff("neg_square"), T, "-x^2"});
    v.push_back(TerminalB{builtin_payoff("abs"), T, "|x|"});
    v.push_back(TerminalB{builtin_payoff("call", {1.0, 1.0, {}}), T, "(x-1)+"});
    v.push_back(TerminalX{builtin_payoff("log"), 1.0, T, "log X"});
    v.push_back(TerminalQV{builtin_payoff("qv"), T, "q"});
    v.push_back(TerminalQV{builtin_payoff("sqrt_qv", {1.0, 1.0, {}}), T, "sqrt(q)-1"});
    v.push_back(TerminalQV{builtin_payoff("neg_qv"), T, "-q"});
    return v;
}

inline TerminalQV volatility_swap(double strike = 1.0, double T = 1.0) {
    return {builtin_payoff("sqrt_qv", {strike, 1.0, {}}), T, "volatility_swap"};
}
inline TerminalQV variance_swap(double strike = 2.0, double T = 1.0) {
    return {builtin_payoff("qv", {strike, 1.0, {}}), T, "variance_swap"};
}

// |eta_t1| = exp(B_t1 - <B>_t1 / 2) = 1 + int exp(B - <B>/2) dB
inline PiecewiseEta exponential_two_step(double t1 = 0.5, double T = 1.0, double eta0 = 0.1, double mean = 0.0,
                                         FeedbackProcess theta = FeedbackProcess::constant(0.0)) {
    PiecewiseEta c;
    c.theta = std::move(theta);
    c.eta0 = eta0;
    c.abs_eta1_mean = 1.0;
    c.mu = FeedbackProcess::of_tbq([](double, double b, double q) { return std::exp(b - 0.5 * q); });
    c.grid = TimeGrid({0.0, t1, T});
    c.mean = mean;
    c.abs_eta1_closed = [](const State& s) { return std::exp(s.b - 0.5 * s.q); };
    c.name = "exponential_two_step";
    return c;
}

// single step with eta_t1 = exp(B_t1)
inline PiecewiseEta exponential_one_step(double t1 = 1.0, double T = 2.0, double mean = 0.0) {
    PiecewiseEta c;
    c.eta0 = 0.0;
    c.grid = TimeGrid({0.0, t1, T});
    c.mean = mean;
    c.abs_eta1_closed = [](const State& s) { return std::exp(s.b); };
    c.name = "exponential_one_step";
    return c;
}

}  // namespace gexp
