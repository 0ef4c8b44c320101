#pragma once

#include "io.hpp"

namespace gexp {

struct RunConfig {
    std::optional<VolatilityBand> band;  // set from --band; wins over the band in the claim file
    int tree_depth = 10;
    int vol_choice_count = 4;  // lattice controls including both extremes
    SolverConfig pde;
    std::uint64_t seed = 20240611;
    std::string out = "json";  // json | csv | table
    bool inject_bad = false;

    void validate() const {
        if (tree_depth < 1) throw InputError("depth must be at least 1");
        if (tree_depth > max_tree_depth) throw ResourceError("depth over the cap of " + std::to_string(max_tree_depth));
        if (vol_choice_count < 2) throw InputError("need at least two volatility choices");
        if (out != "json" && out != "csv" && out != "table") throw InputError("unknown output format '" + out + "'");
        if (pde.dx < 0.0 || pde.half_width_mult <= 0.0) throw ConfigError("bad grid parameters");
    }
    VolatilityBand band_for(const ClaimFile& c) const {
        if (band) return *band;
        if (c.band) return *c.band;
        return VolatilityBand{};
    }
    HedgeConfig hedge_config() const {
        HedgeConfig h;
        h.pde = pde;
        h.depth = tree_depth;
        h.interior = vol_choice_count - 2;
        return h;
    }
};

enum ExitCode { Ok = 0, VerificationFailed = 1, BadInput = 2, ResourceLimit = 3 };

inline void emit(const Json& j, const std::string& fmt, std::ostream& os) {
    if (fmt == "json") {
        os << j.dump(2) << '\n';
        return;
    }
    // flat key/value view for csv and table
    std::function<void(const std::string&, const Json&)> walk = [&](const std::string& k, const Json& v) {
        if (v.is_object()) {
            for (auto it = v.begin(); it != v.end(); ++it) walk(k.empty() ? it.key() : k + "." + it.key(), it.value());
        } else if (v.is_array()) {
            for (std::size_t i = 0; i < v.size(); ++i) walk(k + "[" + std::to_string(i) + "]", v[i]);
        } else {
            const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
            if (fmt == "csv") os << k << ',' << s << '\n';
            else os << k << std::string(k.size() < 32 ? 32 - k.size() : 1, ' ') << s << '\n';
        }
    };
    if (fmt == "csv") os << "key,value\n";
    walk("", j);
}

inline int cmd_price(const ClaimFile& cf, const RunConfig& cfg, std::ostream& os) {
    cfg.validate();
    const auto band = cfg.band_for(cf);
    const auto& claim = cf.claim;
    Json j;
    j["claim"] = name_of(claim);
    j["band"] = Json::array({num(band.var_lo), num(band.var_hi)});
    double ou, ol;
    if (has_pde(claim)) {
        auto tree = ScenarioTree::make(cfg.tree_depth, maturity_of(claim), band, cfg.vol_choice_count - 2);
        ou = terminal_expectation(claim, tree);
        ol = -terminal_expectation(claim, tree, -1.0);
        const double pu = solve_claim(claim, band, cfg.pde).u0();
        const double pl = -solve_claim(claim, band, cfg.pde, -1.0).u0();
        j["upper"] = num(pu);
        j["lower"] = num(pl);
        j["pde"] = Json{{"upper", num(pu)}, {"lower", num(pl)}};
        j["oracle"] = Json{{"upper", num(ou)}, {"lower", num(ol)}, {"depth", cfg.tree_depth}};
        j["discrepancy"] = Json{{"upper", num(pu - ou)}, {"lower", num(pl - ol)}};
    } else {
        auto tree = ScenarioTree::make(cfg.tree_depth, maturity_of(claim), band, 0);
        ou = claim_expectation(claim, tree);
        ol = -claim_expectation(claim, tree, -1.0);
        j["upper"] = num(ou);
        j["lower"] = num(ol);
        j["pde"] = nullptr;
        j["oracle"] = Json{{"upper", num(ou)}, {"lower", num(ol)}, {"depth", cfg.tree_depth}};
        j["discrepancy"] = nullptr;
    }
    emit(j, cfg.out, os);
    return Ok;
}

inline int cmd_hedge(const ClaimFile& cf, const RunConfig& cfg, std::ostream& os) {
    cfg.validate();
    const auto band = cfg.band_for(cf);
    const auto r = hedge(cf.claim, band, cfg.hedge_config());
    auto j = to_json(r, cf.claim, band);
    if (auto* d = std::get_if<Decomposed>(&cf.claim); d && r.hedge_class == HedgeClass::GeneralBoundsOnly) {
        auto tree = ScenarioTree::make(std::min(cfg.tree_depth, 10), d->grid.maturity(), band, 0);
        const auto rb = risk_bounds(*d, band, tree);
        j["risk_bounds"] = Json{{"j_lo", num(rb.j_lo)}, {"j_hi", num(rb.j_hi)}, {"expected_k", num(rb.expected_k)}};
    }
    emit(j, cfg.out, os);
    return Ok;
}

// PDE grid as CSV (t, x, u, theta, eta)
inline int cmd_grid(const ClaimFile& cf, const RunConfig& cfg, std::ostream& os) {
    cfg.validate();
    if (!has_pde(cf.claim)) throw InputError("grid dump needs a terminal claim");
    write_grid_csv(solve_claim(cf.claim, cfg.band_for(cf), cfg.pde), os);
    return Ok;
}

// worst-case control of the lattice as CSV
inline int cmd_policy(const ClaimFile& cf, const RunConfig& cfg, std::ostream& os) {
    cfg.validate();
    const auto band = cfg.band_for(cf);
    auto tree = ScenarioTree::make(cfg.tree_depth, maturity_of(cf.claim), band, cfg.vol_choice_count - 2);
    tree.x0 = x0_of(cf.claim);
    MarkovFunctional f;
    const auto& c = cf.claim;
    if (auto* p = std::get_if<TerminalB>(&c)) f.terminal = [p](const State& s) { return p->payoff(s.b); };
    else if (auto* p = std::get_if<TerminalX>(&c)) f.terminal = [p](const State& s) { return p->payoff(s.x); };
    else if (auto* p = std::get_if<TerminalQV>(&c)) f.terminal = [p](const State& s) { return p->payoff(s.q); };
    else throw InputError("policy dump needs a terminal claim");
    write_policy_csv(worst_scenario(f, tree), os);
    return Ok;
}

namespace suites {

inline std::vector<VerificationReport> jensen(const RunConfig& cfg, const VolatilityBand& band) {
    std::vector<VerificationReport> out;
    const int depth = std::min(cfg.tree_depth, 12);
    for (const auto& c : builtin_suite()) out.push_back(jensen_check(c, band, depth, cfg.vol_choice_count - 2));
    std::mt19937_64 rng(cfg.seed);
    for (int i = 0; i < 50; ++i)
        out.push_back(jensen_check(random_terminal_claim(rng, i), band, depth, cfg.vol_choice_count - 2));
    return out;
}

inline std::vector<VerificationReport> estimates(const RunConfig& cfg, const VolatilityBand& band) {
    std::vector<VerificationReport> out;
    const int depth = std::max(cfg.tree_depth, 10);
    for (double t : {1.0, 0.25})
        for (auto& r : corollary_checks(t, band, depth, cfg.vol_choice_count - 2)) out.push_back(r);
    const auto tree = ScenarioTree::make(10, 1.0, band, 0);
    const auto one = FeedbackProcess::constant(1.0), zero = FeedbackProcess::constant(0.0);
    out.push_back(cross_term_estimate(one, one, tree, "cross_term:theta=1,eta=1"));
    out.push_back(cross_term_estimate(zero, one, tree, "cross_term:theta=0,eta=1"));
    out.push_back(cross_term_estimate(one, FeedbackProcess::constant(-1.0), tree, "cross_term:theta=1,eta=-1"));
    const auto hc = cfg.hedge_config();
    out.push_back(reconstruction_check(TerminalB{builtin_payoff("square"), 1.0, "x^2"}, band, hc, 12).report);
    out.push_back(reconstruction_check(TerminalX{builtin_payoff("log"), 1.0, 1.0, "log X"}, band, hc, 12).report);
    return out;
}

inline std::vector<VerificationReport> optimality(const RunConfig& cfg, const VolatilityBand& band) {
    std::vector<VerificationReport> out;
    const auto hc = cfg.hedge_config();
    const std::vector<ClaimSpec> claims{TerminalB{builtin_payoff("identity"), 1.0, "x"},
                                        TerminalB{builtin_payoff("square"), 1.0, "x^2"}, volatility_swap(),
                                        variance_swap()};
    for (const auto& c : claims) out.push_back(verify_local_optimality(c, hedge(c, band, hc), band));
    out.push_back(boundedness_check(claims[1], band, {-10, -5, -2, -1, -0.5, 0.5, 1, 2, 5, 10}, hc));
    out.push_back(boundedness_check(TerminalB{[](double) { return 1.0; }, 1.0, "constant"}, band,
                                    {-10, -5, -2, -1, -0.5, 0.5, 1, 2, 5, 10}, hc));
    if (cfg.inject_bad) {
        auto bad = shifted_fixture(claims[1], hedge(claims[1], band, hc), band);
        auto r = verify_local_optimality(claims[1], bad, band);
        r.name += ":injected_v0_plus_1";
        out.push_back(r);
    }
    return out;
}

inline std::vector<VerificationReport> bounds(const RunConfig& cfg, const VolatilityBand& band) {
    std::vector<VerificationReport> out;
    std::mt19937_64 rng(cfg.seed + 1);
    for (int i = 0; i < 20; ++i) {
        auto rp = random_piecewise_claim(rng);
        rp.claim.name += "_" + std::to_string(i);
        out.push_back(sandwich_check(rp.claim, rp.mu, band).report);
    }
    for (int i = 0; i < 5; ++i) {
        auto rp = random_piecewise_claim(rng, 1.0, 4, true);
        rp.claim.name += "_" + std::to_string(i);
        const auto s = sandwich_check(rp.claim, rp.mu, band);
        out.push_back(s.report);
        out.push_back(equality_report("collapse:" + rp.claim.name, s.bounds.j_lo, s.bounds.j_hi,
                                      0.01 * std::abs(s.bounds.j_lo) + 1e-12));
    }
    return out;
}

inline std::vector<VerificationReport> convergence(const RunConfig& cfg, const VolatilityBand& band) {
    const auto hc = cfg.hedge_config();
    std::vector<VerificationReport> out;
    const ClaimSpec b2 = TerminalB{builtin_payoff("square"), 1.0, "x^2"};
    const auto hb = hedge(b2, band, hc);
    out.push_back(convergence_check(b2, hb.optimal_risk, [](double x) { return std::sin(x); },
                                    {0.4, 0.2, 0.1, 0.05}, band, hc).report);
    const ClaimSpec vs = volatility_swap();
    const auto hv = hedge(vs, band, hc);
    out.push_back(convergence_check(vs, hv.optimal_risk, [](double q) { return std::sin(q); },
                                    {0.4, 0.2, 0.1, 0.05, 0.025, 0.0125}, band, hc).report);
    return out;
}

}  // namespace suites

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> v{"all", "jensen", "estimates", "optimality", "bounds", "convergence"};
    return v;
}

inline std::vector<VerificationReport> run_suite(const std::string& suite, const RunConfig& cfg,
                                                 const VolatilityBand& band) {
    std::vector<VerificationReport> out;
    auto add = [&](std::vector<VerificationReport> v) {
        for (auto& r : v) out.push_back(std::move(r));
    };
    const bool all = suite == "all";
    if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
        throw InputError("unknown suite '" + suite + "'");
    if (all || suite == "jensen") add(suites::jensen(cfg, band));
    if (all || suite == "estimates") add(suites::estimates(cfg, band));
    if (all || suite == "optimality") add(suites::optimality(cfg, band));
    if (all || suite == "bounds") add(suites::bounds(cfg, band));
    if (all || suite == "convergence") add(suites::convergence(cfg, band));
    for (auto& r : out) r.seed = cfg.seed;
    return out;
}

inline int cmd_verify(const std::string& suite, const RunConfig& cfg, std::ostream& os) {
    cfg.validate();
    const auto reports = run_suite(suite, cfg, cfg.band.value_or(VolatilityBand{}));
    if (cfg.out == "json") write_jsonl(reports, os);
    else if (cfg.out == "csv") write_csv(reports, os);
    else write_table(reports, os);
    for (const auto& r : reports)
        if (!r.passed) return VerificationFailed;
    return Ok;
}

}  // namespace gexp
