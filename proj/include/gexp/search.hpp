#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace gexp {

struct MinResult {
    double x = 0.0;
    double f = 0.0;
    int evals = 0;
};

// golden-section on [a,b] for a unimodal f
inline MinResult golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    MinResult out;
    if (!(b > a)) {
        out.x = a;
        out.f = f(a);
        out.evals = 1;
        return out;
    }
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    out.evals = 2;
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        ++out.evals;
    }
    out.x = 0.5 * (a + b);
    out.f = f(out.x);
    ++out.evals;
    // keep the better probe if it beats the midpoint
    if (fc < out.f) { out.x = c; out.f = fc; }
    if (fd < out.f) { out.x = d; out.f = fd; }
    return out;
}

// uniform pre-scan then golden-section inside the best bracket; ties keep the first point
inline MinResult scan_then_golden(const std::function<double(double)>& f, double a, double b, int n, double tol) {
    if (!(b > a)) return golden_section(f, a, a, tol);
    n = std::max(n, 3);
    std::vector<double> xs(n), fs(n);
    std::size_t best = 0;
    for (int i = 0; i < n; ++i) {
        xs[i] = a + (b - a) * i / (n - 1);
        fs[i] = f(xs[i]);
        if (fs[i] < fs[best]) best = std::size_t(i);
    }
    const double lo = xs[best == 0 ? 0 : best - 1];
    const double hi = xs[best + 1 >= std::size_t(n) ? n - 1 : best + 1];
    MinResult g = golden_section(f, lo, hi, tol);
    g.evals += n;
    if (fs[best] < g.f) {
        g.x = xs[best];
        g.f = fs[best];
    }
    return g;
}

// memoizes a scalar objective by argument
class CachedObjective {
public:
    explicit CachedObjective(std::function<double(double)> f) : f_(std::move(f)) {}
    double operator()(double x) {
        auto it = cache_.find(x);
        if (it != cache_.end()) return it->second;
        const double v = f_(x);
        cache_.emplace(x, v);
        return v;
    }
    std::size_t calls() const { return cache_.size(); }

private:
    std::function<double(double)> f_;
    std::map<double, double> cache_;
};

}  // namespace gexp
