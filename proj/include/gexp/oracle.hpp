#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

#include "core.hpp"

namespace gexp {

enum class ShockScheme { Binomial, ThreePoint };

struct Shock {
    double z;
    double p;
};

inline const std::vector<Shock>& shocks_of(ShockScheme s) {
    static const std::vector<Shock> bin{{1.0, 0.5}, {-1.0, 0.5}};
    // matches moments up to order 4 of N(0,1)
    static const std::vector<Shock> tri{{std::sqrt(3.0), 1.0 / 6.0}, {0.0, 2.0 / 3.0}, {-std::sqrt(3.0), 1.0 / 6.0}};
    return s == ShockScheme::Binomial ? bin : tri;
}

inline constexpr int max_tree_depth = 14;
inline constexpr double max_tree_leaves = 16777216.0;  // 2^24, non-recombining enumeration budget

struct ScenarioTree {
    int depth = 10;
    double maturity = 1.0;
    VolatilityBand band;
    std::vector<double> vol_choices{1.0, 2.0, 3.0, 4.0};
    ShockScheme scheme = ShockScheme::Binomial;
    double x0 = 1.0;

    static ScenarioTree make(int depth, double T, const VolatilityBand& band, int interior = 2,
                             ShockScheme scheme = ShockScheme::Binomial) {
        ScenarioTree t;
        t.depth = depth;
        t.maturity = T;
        t.band = band;
        t.scheme = scheme;
        t.vol_choices.clear();
        if (band.degenerate()) {
            t.vol_choices.push_back(band.var_hi);
        } else {
            for (int i = 0; i <= interior + 1; ++i)
                t.vol_choices.push_back(band.var_lo + band.spread() * i / (interior + 1));
            t.vol_choices.back() = band.var_hi;
        }
        t.validate();
        return t;
    }

    void validate() const {
        band.validate();
        if (depth < 1) throw InputError("tree depth must be at least 1");
        if (depth > max_tree_depth)
            throw ResourceError("tree depth " + std::to_string(depth) + " over cap " + std::to_string(max_tree_depth));
        if (!(maturity > 0.0)) throw InputError("tree maturity must be positive");
        if (vol_choices.empty()) throw InputError("no volatility choices");
        for (std::size_t i = 0; i < vol_choices.size(); ++i) {
            if (vol_choices[i] < band.var_lo - 1e-12 || vol_choices[i] > band.var_hi + 1e-12)
                throw InputError("volatility choice outside the band");
            if (i > 0 && !(vol_choices[i] > vol_choices[i - 1])) throw InputError("volatility choices must increase");
        }
        if (std::abs(vol_choices.front() - band.var_lo) > 1e-12 || std::abs(vol_choices.back() - band.var_hi) > 1e-12)
            throw InputError("extreme controls must be available");
    }

    double dt() const { return maturity / depth; }
    std::size_t branching() const { return vol_choices.size() * shocks_of(scheme).size(); }
    double leaf_count(int levels) const { return std::pow(double(branching()), levels); }
    double time_at(int k) const { return k == depth ? maturity : maturity * k / depth; }

    // step index of time t, throws unless t sits on a step boundary
    int step_of(double t) const {
        const double r = t / dt();
        const long k = std::lround(r);
        if (std::abs(r - k) > 1e-9 || k < 0 || k > depth) throw InputError("time " + std::to_string(t) + " is not a tree knot");
        return int(k);
    }
    void check_grid(const TimeGrid& g) const {
        if (std::abs(g.maturity() - maturity) > 1e-12 * std::max(1.0, maturity))
            throw InputError("claim maturity differs from tree maturity");
        for (double k : g.knots) step_of(k);
    }
};

// terminal reward plus optional per-edge reward; values depend only on (t, B, <B>, X)
struct MarkovFunctional {
    std::function<double(const State&)> terminal;
    std::function<double(const State&, const State&)> running;
};

// full-path evaluator; wealth is threaded through State::w when a portfolio is supplied
struct PathFunctional {
    std::function<double(std::span<const State>)> eval;
    bool needs_wealth = false;
};

// (choice index, shock index) per step from the root
using NodePrefix = std::vector<std::pair<int, int>>;

struct PolicyEntry {
    int step;
    std::size_t node_id;
    double b;
    double q;
    double chosen_var;
    double value;
};

struct Policy {
    std::vector<std::vector<std::uint64_t>> keys;
    std::vector<std::vector<int>> choice;
    std::vector<PolicyEntry> entries;
    double value = 0.0;
};

namespace detail {

// exact dynamic program over the tree; nodes carrying equal per-category
// move counts carry equal (B, <B>) and are merged
class Lattice {
public:
    Lattice(const ScenarioTree& tree, const MarkovFunctional& f, const NodePrefix& prefix = {})
        : tree_(tree), f_(f), sh_(shocks_of(tree.scheme)) {
        tree.validate();
        ns_ = int(sh_.size());
        cats_ = int(tree.vol_choices.size()) * ns_;
        if (cats_ > 16) throw ResourceError("too many volatility choices for the lattice");
        const double dt = tree.dt();
        for (double v : tree.vol_choices)
            for (const auto& s : sh_) {
                db_.push_back(s.z * std::sqrt(v * dt));
                dq_.push_back(v * dt);
            }
        start_ = int(prefix.size());
        if (start_ > tree.depth) throw InputError("node prefix longer than the tree");
        std::uint64_t key = 0;
        prefix_states_.push_back(state_of(0, 0));
        for (const auto& [c, s] : prefix) {
            if (c < 0 || c >= int(tree.vol_choices.size()) || s < 0 || s >= ns_)
                throw InputError("invalid node prefix");
            key += std::uint64_t(1) << (4 * (c * ns_ + s));
            prefix_states_.push_back(state_of(int(prefix_states_.size()), key));
        }
        build(key);
    }

    State state_of(int k, std::uint64_t key) const {
        State s;
        s.t = tree_.time_at(k);
        for (int c = 0; c < cats_; ++c) {
            const double n = double((key >> (4 * c)) & 15u);
            s.b += n * db_[c];
            s.q += n * dq_[c];
        }
        s.x = tree_.x0 * std::exp(s.b - 0.5 * s.q);
        return s;
    }

    // backward induction; fixed != nullptr replays a given policy
    double solve(const Policy* fixed = nullptr) {
        const int n = tree_.depth;
        vals_.assign(n + 1, {});
        arg_.assign(n + 1, {});
        auto& last = vals_[n];
        last.resize(keys_[n].size());
        for (std::size_t i = 0; i < keys_[n].size(); ++i) last[i] = f_.terminal(state_of(n, keys_[n][i]));
        const int nv = int(tree_.vol_choices.size());
        for (int k = n - 1; k >= start_; --k) {
            const auto& ks = keys_[k];
            const auto& kn = keys_[k + 1];
            auto& vk = vals_[k];
            auto& ak = arg_[k];
            vk.resize(ks.size());
            ak.resize(ks.size());
            for (std::size_t i = 0; i < ks.size(); ++i) {
                const State s0 = f_.running ? state_of(k, ks[i]) : State{};
                int lo = 0, hi = nv - 1;
                if (fixed) lo = hi = policy_choice(*fixed, k, ks[i]);
                double best = -std::numeric_limits<double>::infinity();
                int arg = lo;
                for (int j = lo; j <= hi; ++j) {
                    double acc = 0.0;
                    for (int s = 0; s < ns_; ++s) {
                        const std::uint64_t child = ks[i] + (std::uint64_t(1) << (4 * (j * ns_ + s)));
                        const std::size_t ci = index_of(kn, child);
                        double v = vals_[k + 1][ci];
                        if (f_.running) v += f_.running(s0, state_of(k + 1, child));
                        acc += sh_[s].p * v;
                    }
                    if (acc >= best) {
                        best = acc;
                        arg = j;
                    }
                }
                vk[i] = best;
                ak[i] = arg;
            }
        }
        double past = 0.0;
        if (f_.running)
            for (std::size_t k = 0; k + 1 < prefix_states_.size(); ++k)
                past += f_.running(prefix_states_[k], prefix_states_[k + 1]);
        return past + vals_[start_][0];
    }

    Policy policy() const {
        Policy p;
        p.keys = keys_;
        p.choice.assign(keys_.size(), {});
        for (int k = start_; k < tree_.depth; ++k) {
            p.choice[k] = arg_[k];
            for (std::size_t i = 0; i < keys_[k].size(); ++i) {
                const State s = state_of(k, keys_[k][i]);
                p.entries.push_back({k, i, s.b, s.q, tree_.vol_choices[arg_[k][i]], vals_[k][i]});
            }
        }
        p.value = vals_[start_][0];
        return p;
    }

private:
    static std::size_t index_of(const std::vector<std::uint64_t>& ks, std::uint64_t key) {
        auto it = std::lower_bound(ks.begin(), ks.end(), key);
        return std::size_t(it - ks.begin());
    }
    static int policy_choice(const Policy& p, int k, std::uint64_t key) {
        const auto& ks = p.keys.at(k);
        auto it = std::lower_bound(ks.begin(), ks.end(), key);
        if (it == ks.end() || *it != key) throw InputError("policy does not cover node");
        return p.choice.at(k)[std::size_t(it - ks.begin())];
    }

    void build(std::uint64_t root) {
        keys_.assign(tree_.depth + 1, {});
        keys_[start_] = {root};
        for (int k = start_; k < tree_.depth; ++k) {
            auto& next = keys_[k + 1];
            next.reserve(keys_[k].size() * 4);
            for (std::uint64_t key : keys_[k])
                for (int c = 0; c < cats_; ++c) next.push_back(key + (std::uint64_t(1) << (4 * c)));
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            if (next.size() > 20000000u) throw ResourceError("lattice too large");
        }
    }

    const ScenarioTree& tree_;
    const MarkovFunctional& f_;
    const std::vector<Shock>& sh_;
    int ns_ = 0, cats_ = 0, start_ = 0;
    std::vector<double> db_, dq_;
    std::vector<State> prefix_states_;
    std::vector<std::vector<std::uint64_t>> keys_;
    std::vector<std::vector<double>> vals_;
    std::vector<std::vector<int>> arg_;
};

}  // namespace detail

inline double g_expectation(const MarkovFunctional& f, const ScenarioTree& tree) {
    detail::Lattice lat(tree, f);
    return lat.solve();
}

inline double conditional_g_expectation(const MarkovFunctional& f, const ScenarioTree& tree, const NodePrefix& prefix) {
    detail::Lattice lat(tree, f, prefix);
    return lat.solve();
}

// argmax control at every lattice node, ties resolved toward the larger variance
inline Policy worst_scenario(const MarkovFunctional& f, const ScenarioTree& tree) {
    detail::Lattice lat(tree, f);
    lat.solve();
    return lat.policy();
}

inline double replay_policy(const MarkovFunctional& f, const ScenarioTree& tree, const Policy& p) {
    detail::Lattice lat(tree, f);
    return lat.solve(&p);
}

inline void write_policy_csv(const Policy& p, std::ostream& os) {
    os << "step,node_id,B,qv,chosen_var,value\n";
    char buf[256];
    for (const auto& e : p.entries) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.12g,%.12g,%.12g,%.12g\n", e.step, e.node_id, e.b, e.q, e.chosen_var,
                      e.value);
        os << buf;
    }
}

// ---- non-recombining enumeration for path-dependent functionals

using LeafWriter = std::function<void(std::span<const State>, double* out)>;

struct LeafTable {
    std::vector<double> data;
    int width = 1;
    int levels = 0;
    std::size_t size() const { return data.size() / std::size_t(width); }
};

// leaves in canonical order: at every node children run choice-major, then shock
inline LeafTable collect_leaves(const ScenarioTree& tree, int width, const LeafWriter& write,
                                const Portfolio* portfolio = nullptr, const NodePrefix& prefix = {}) {
    tree.validate();
    const auto& sh = shocks_of(tree.scheme);
    const int ns = int(sh.size());
    const int levels = tree.depth - int(prefix.size());
    if (levels < 0) throw InputError("node prefix longer than the tree");
    if (tree.leaf_count(levels) > max_tree_leaves)
        throw ResourceError("scenario tree too large: " + std::to_string(tree.leaf_count(levels)) + " leaves");
    const double dt = tree.dt();
    std::vector<State> path(tree.depth + 1);
    path[0] = State{0.0, 0.0, 0.0, tree.x0, portfolio ? portfolio->v0 : 0.0};
    auto advance = [&](int k, int c, int s) {
        const double v = tree.vol_choices[c];
        const State& a = path[k];
        State& n = path[k + 1];
        n.t = tree.time_at(k + 1);
        const double db = sh[s].z * std::sqrt(v * dt);
        n.b = a.b + db;
        n.q = a.q + v * dt;
        n.x = tree.x0 * std::exp(n.b - 0.5 * n.q);
        n.w = a.w;
        if (portfolio) n.w += portfolio->phi_x(PathView{std::span<const State>(path.data(), k + 1), dt}) * db;
    };
    for (std::size_t k = 0; k < prefix.size(); ++k) {
        const auto [c, s] = prefix[k];
        if (c < 0 || c >= int(tree.vol_choices.size()) || s < 0 || s >= ns) throw InputError("invalid node prefix");
        advance(int(k), c, s);
    }
    LeafTable out;
    out.width = width;
    out.levels = levels;
    out.data.resize(std::size_t(tree.leaf_count(levels)) * std::size_t(width));
    std::size_t leaf = 0;
    const int nv = int(tree.vol_choices.size());
    std::function<void(int)> rec = [&](int k) {
        if (k == tree.depth) {
            write(std::span<const State>(path.data(), path.size()), out.data.data() + leaf * width);
            ++leaf;
            return;
        }
        for (int c = 0; c < nv; ++c)
            for (int s = 0; s < ns; ++s) {
                advance(k, c, s);
                rec(k + 1);
            }
    };
    rec(int(prefix.size()));
    return out;
}

// adversarial backward reduction of per-leaf values (column col of the table or a plain vector)
inline double reduce_leaves(std::vector<double> vals, const ScenarioTree& tree, int levels) {
    const auto& sh = shocks_of(tree.scheme);
    const std::size_t ns = sh.size(), nv = tree.vol_choices.size(), br = ns * nv;
    std::size_t n = vals.size();
    for (int l = 0; l < levels; ++l) {
        const std::size_t groups = n / br;
        for (std::size_t g = 0; g < groups; ++g) {
            const double* v = vals.data() + g * br;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < nv; ++j) {
                double acc = 0.0;
                for (std::size_t s = 0; s < ns; ++s) acc += sh[s].p * v[j * ns + s];
                if (acc >= best) best = acc;
            }
            vals[g] = best;
        }
        n = groups;
    }
    return vals[0];
}

template <class F>
double reduce_table(const LeafTable& t, const ScenarioTree& tree, F&& leaf_value) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = leaf_value(t.data.data() + i * std::size_t(t.width));
    return reduce_leaves(std::move(v), tree, t.levels);
}

inline double g_expectation(const PathFunctional& f, const ScenarioTree& tree, const Portfolio* p = nullptr) {
    if (f.needs_wealth && !p) throw InputError("functional needs a portfolio");
    auto t = collect_leaves(tree, 1, [&](std::span<const State> path, double* o) { o[0] = f.eval(path); }, p);
    return reduce_leaves(std::move(t.data), tree, t.levels);
}

inline double conditional_g_expectation(const PathFunctional& f, const ScenarioTree& tree, const NodePrefix& prefix,
                                        const Portfolio* p = nullptr) {
    if (f.needs_wealth && !p) throw InputError("functional needs a portfolio");
    auto t = collect_leaves(tree, 1, [&](std::span<const State> path, double* o) { o[0] = f.eval(path); }, p, prefix);
    return reduce_leaves(std::move(t.data), tree, t.levels);
}

// H evaluated on a full tree path
inline std::function<double(std::span<const State>)> claim_on_path(const ClaimSpec& claim, const VolatilityBand& band,
                                                                   double dt) {
    return std::visit(
        [&](const auto& c) -> std::function<double(std::span<const State>)> {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, TerminalB>) {
                return [c](std::span<const State> p) { return c.payoff(p.back().b); };
            } else if constexpr (std::is_same_v<T, TerminalX>) {
                return [c](std::span<const State> p) { return c.payoff(p.back().x); };
            } else if constexpr (std::is_same_v<T, TerminalQV>) {
                return [c](std::span<const State> p) { return c.payoff(p.back().q); };
            } else if constexpr (std::is_same_v<T, Decomposed>) {
                auto d = to_decomposition(c);
                return [d, band, dt](std::span<const State> p) { return decomposition_on_path(d, p, dt, band); };
            } else {
                c.validate();
                return [c, band, dt](std::span<const State> p) {
                    double h = c.mean;
                    for (std::size_t k = 0; k + 1 < p.size(); ++k)
                        h += c.theta(PathView{p.subspan(0, k + 1), dt}) * (p[k + 1].b - p[k].b);
                    const double t1 = c.t1(), T = c.maturity();
                    const State& s1 = PathView{p, dt}.at_time(t1);
                    std::size_t n1 = 0;
                    while (n1 < p.size() && p[n1].t <= t1 + 1e-9) ++n1;
                    const double e1 = c.eta1_sign * abs_eta1_on_path(c, p.subspan(0, n1), dt, band);
                    h += c.eta0 * s1.q - 2.0 * g_function(c.eta0, band) * t1;
                    h += e1 * (p.back().q - s1.q) - 2.0 * g_function(e1, band) * (T - t1);
                    return h;
                };
            }
        },
        claim);
}

inline void check_claim_tree(const ClaimSpec& claim, const ScenarioTree& tree) {
    if (auto* d = std::get_if<Decomposed>(&claim)) tree.check_grid(d->grid);
    else if (auto* pe = std::get_if<PiecewiseEta>(&claim)) tree.check_grid(pe->grid);
    else if (std::abs(maturity_of(claim) - tree.maturity) > 1e-12 * std::max(1.0, tree.maturity))
        throw InputError("claim maturity differs from tree maturity");
}

// worst-case mean squared hedging error sup_P E^P[(H - V_T)^2]
inline double terminal_risk(const ClaimSpec& claim, const Portfolio& p, ScenarioTree tree) {
    check_claim_tree(claim, tree);
    tree.x0 = x0_of(claim);
    auto h = claim_on_path(claim, tree.band, tree.dt());
    auto t = collect_leaves(
        tree, 1,
        [&](std::span<const State> path, double* o) {
            const double r = h(path) - path.back().w;
            o[0] = r * r;
        },
        &p);
    return reduce_leaves(std::move(t.data), tree, t.levels);
}

// G-expectation of a claim on the tree (path engine)
inline double claim_expectation(const ClaimSpec& claim, ScenarioTree tree, double sign = 1.0) {
    check_claim_tree(claim, tree);
    tree.x0 = x0_of(claim);
    auto h = claim_on_path(claim, tree.band, tree.dt());
    auto t = collect_leaves(tree, 1, [&](std::span<const State> path, double* o) { o[0] = sign * h(path); });
    return reduce_leaves(std::move(t.data), tree, t.levels);
}

// G-expectation of a terminal claim via the lattice
inline double terminal_expectation(const ClaimSpec& claim, ScenarioTree tree, double sign = 1.0) {
    tree.x0 = x0_of(claim);
    MarkovFunctional f;
    if (auto* c = std::get_if<TerminalB>(&claim)) f.terminal = [c, sign](const State& s) { return sign * c->payoff(s.b); };
    else if (auto* c = std::get_if<TerminalX>(&claim)) f.terminal = [c, sign](const State& s) { return sign * c->payoff(s.x); };
    else if (auto* c = std::get_if<TerminalQV>(&claim)) f.terminal = [c, sign](const State& s) { return sign * c->payoff(s.q); };
    else throw InputError("claim is not a terminal payoff");
    check_claim_tree(claim, tree);
    return g_expectation(f, tree);
}

}  // namespace gexp
