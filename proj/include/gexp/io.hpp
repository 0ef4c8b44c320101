#pragma once

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "riskeval.hpp"

namespace gexp {

using Json = nlohmann::ordered_json;

// 12 significant digits, no negative zero
inline double round12(double x) {
    if (!std::isfinite(x)) return x;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    const double v = std::stod(buf);
    return v == 0.0 ? 0.0 : v;
}

inline Json num(double x) {
    if (!std::isfinite(x)) return nullptr;
    return round12(x);
}

// ---- claim files

struct ClaimFile {
    ClaimSpec claim;
    std::optional<VolatilityBand> band;
};

namespace detail {

inline double get_num(const Json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw InputError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline TimeGrid parse_grid(const Json& j, double T) {
    if (!j.contains("grid")) return TimeGrid({0.0, T});
    return TimeGrid(j.at("grid").get<std::vector<double>>());
}

// number | {"type": constant|affine|piecewise|exp_martingale, ...}
inline FeedbackProcess parse_process(const Json& j, const TimeGrid& grid) {
    if (j.is_number()) return FeedbackProcess::constant(j.get<double>());
    if (!j.is_object() || !j.contains("type")) throw InputError("process must be a number or an object with a type");
    const auto type = j.at("type").get<std::string>();
    if (type == "constant") return FeedbackProcess::constant(get_num(j, "value", 0.0));
    if (type == "affine") {
        const double c0 = get_num(j, "c0", 0.0), ct = get_num(j, "ct", 0.0), cb = get_num(j, "cb", 0.0),
                     cq = get_num(j, "cq", 0.0);
        if (cb == 0.0 && cq == 0.0) return FeedbackProcess::of_t([c0, ct](double t) { return c0 + ct * t; });
        if (cb == 0.0) return FeedbackProcess::of_q([c0, ct, cq](double t, double q) { return c0 + ct * t + cq * q; });
        return FeedbackProcess::of_tbq(
            [c0, ct, cb, cq](double t, double b, double q) { return c0 + ct * t + cb * b + cq * q; });
    }
    if (type == "piecewise") {
        auto v = j.at("values").get<std::vector<double>>();
        if (v.size() != grid.intervals()) throw InputError("piecewise process needs one value per grid interval");
        std::vector<FeedbackProcess> pieces;
        for (double x : v) pieces.push_back(FeedbackProcess::constant(x));
        return FeedbackProcess::splice(grid, std::move(pieces));
    }
    if (type == "exp_martingale") {
        const double a = get_num(j, "scale", 1.0);
        return FeedbackProcess::of_tbq([a](double, double b, double q) { return a * std::exp(b - 0.5 * q); });
    }
    throw InputError("unknown process type '" + type + "'");
}

inline Payoff parse_payoff(const Json& j) {
    if (!j.contains("payoff")) throw InputError("terminal claim needs a payoff");
    PayoffParams p;
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    p.strike = get_num(params, "strike", 0.0);
    p.scale = get_num(params, "scale", 1.0);
    if (params.contains("table"))
        for (const auto& row : params.at("table")) p.table.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
    return builtin_payoff(j.at("payoff").get<std::string>(), p);
}

}  // namespace detail

inline ClaimFile parse_claim(const Json& j) {
    if (!j.is_object()) throw InputError("claim must be a JSON object");
    if (!j.contains("kind")) throw InputError("claim needs a kind");
    ClaimFile out;
    if (j.contains("band")) {
        const auto b = j.at("band").get<std::vector<double>>();
        if (b.size() != 2) throw InputError("band must be [var_lo, var_hi]");
        out.band = VolatilityBand(b[0], b[1]);
    }
    const auto kind = j.at("kind").get<std::string>();
    const double T = detail::get_num(j, "maturity", 1.0);
    if (!(T > 0.0)) throw InputError("maturity must be positive");
    const std::string name = j.value("name", kind);
    if (kind == "terminal_b") {
        out.claim = TerminalB{detail::parse_payoff(j), T, name};
    } else if (kind == "terminal_x") {
        const double x0 = detail::get_num(j, "x0", 1.0);
        if (!(x0 > 0.0)) throw InputError("x0 must be positive");
        out.claim = TerminalX{detail::parse_payoff(j), x0, T, name};
    } else if (kind == "terminal_qv") {
        out.claim = TerminalQV{detail::parse_payoff(j), T, name};
    } else if (kind == "decomposed") {
        Decomposed d;
        d.grid = detail::parse_grid(j, T);
        d.mean = detail::get_num(j, "mean", 0.0);
        d.theta = j.contains("theta") ? detail::parse_process(j.at("theta"), d.grid) : FeedbackProcess::constant(0.0);
        d.eta = j.contains("eta") ? detail::parse_process(j.at("eta"), d.grid) : FeedbackProcess::constant(0.0);
        d.name = name;
        out.claim = d;
    } else if (kind == "piecewise_eta") {
        PiecewiseEta c;
        const std::string preset = j.value("preset", "");
        if (preset == "exponential_two_step") {
            c = exponential_two_step(detail::get_num(j, "t1", 0.5), detail::get_num(j, "maturity", 1.0),
                                     detail::get_num(j, "eta0", 0.1), detail::get_num(j, "mean", 0.0));
        } else if (preset == "exponential_one_step") {
            c = exponential_one_step(detail::get_num(j, "t1", 1.0), detail::get_num(j, "maturity", 2.0),
                                     detail::get_num(j, "mean", 0.0));
        } else if (!preset.empty()) {
            throw InputError("unknown preset '" + preset + "'");
        } else {
            c.grid = detail::parse_grid(j, T);
            c.eta0 = detail::get_num(j, "eta0", 0.0);
            c.abs_eta1_mean = detail::get_num(j, "abs_eta1_mean", 0.0);
            c.xi0 = detail::get_num(j, "xi0", 0.0);
            c.mean = detail::get_num(j, "mean", 0.0);
            c.eta1_sign = detail::get_num(j, "eta1_sign", 1.0) < 0.0 ? -1.0 : 1.0;
            if (j.contains("mu")) c.mu = detail::parse_process(j.at("mu"), c.grid);
        }
        if (j.contains("theta")) c.theta = detail::parse_process(j.at("theta"), c.grid);
        if (j.contains("name")) c.name = name;
        c.validate();
        out.claim = c;
    } else {
        throw InputError("unknown claim kind '" + kind + "'");
    }
    return out;
}

inline ClaimFile parse_claim_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw InputError(std::string("claim file is not valid JSON: ") + e.what());
    }
    try {
        return parse_claim(j);
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed claim: ") + e.what());
    }
}

inline ClaimFile load_claim(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open claim file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_claim_text(ss.str());
}

// ---- results

inline Json to_json(const Prices& p) { return Json{{"upper", num(p.e_h)}, {"lower", num(-p.e_neg_h)}}; }

inline Json phi_table(const Portfolio& p, double T, const VolatilityBand& band) {
    Json rows = Json::array();
    const double vm = 0.5 * (band.var_lo + band.var_hi);
    for (int i = 0; i < 4; ++i) {
        const double t = T * i / 4.0;
        for (double b : {-1.0, 0.0, 1.0}) {
            const double q = vm * t;
            const double x = p.x0 * std::exp(b - 0.5 * q);
            rows.push_back(Json{{"t", num(t)}, {"b", num(b)}, {"q", num(q)}, {"phi_x", num(p.phi_x(t, b, q, x))}});
        }
    }
    return rows;
}

inline Json to_json(const HedgeResult& r, const ClaimSpec& claim, const VolatilityBand& band) {
    Json j;
    j["claim"] = name_of(claim);
    j["class"] = to_string(r.hedge_class);
    j["v0"] = num(r.portfolio.v0);
    j["optimal_risk"] = num(r.optimal_risk);
    j["epsilon"] = r.epsilon ? num(*r.epsilon) : Json(nullptr);
    j["bounds"] = r.bounds ? Json::array({num(r.bounds->first), num(r.bounds->second)}) : Json(nullptr);
    j["prices"] = to_json(r.prices);
    j["boundary"] = r.boundary;
    j["phi"] = Json{{"formula", r.phi_formula}, {"table", phi_table(r.portfolio, maturity_of(claim), band)}};
    Json d = Json::object();
    for (const auto& [k, v] : r.diagnostics) {
        if (d.contains(k)) d[k] = d[k].get<std::string>() + "; " + v;
        else d[k] = v;
    }
    j["diagnostics"] = d;
    return j;
}

inline Json to_json(const VerificationReport& r) {
    auto pairs = [](const std::vector<std::pair<std::string, double>>& v) {
        Json o = Json::object();
        for (const auto& [k, x] : v) o[k] = num(x);
        return o;
    };
    Json j;
    j["name"] = r.name;
    j["kind"] = r.kind;
    j["passed"] = r.passed;
    j["predicted"] = num(r.predicted);
    j["measured"] = num(r.measured);
    j["tolerance"] = num(r.tolerance);
    j["witness"] = r.witness.empty() ? Json(nullptr) : pairs(r.witness);
    j["values"] = pairs(r.values);
    j["notes"] = r.notes;
    j["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
    return j;
}

inline void write_jsonl(const std::vector<VerificationReport>& rs, std::ostream& os) {
    for (const auto& r : rs) os << to_json(r).dump() << '\n';
}

inline void write_table(const std::vector<VerificationReport>& rs, std::ostream& os) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-44s %-6s %16s %16s %12s\n", "check", "result", "predicted", "measured", "tolerance");
    os << buf;
    int fails = 0;
    for (const auto& r : rs) {
        std::snprintf(buf, sizeof buf, "%-44s %-6s %16.10g %16.10g %12.4g\n", r.name.c_str(), r.passed ? "pass" : "FAIL",
                      round12(r.predicted), round12(r.measured), round12(r.tolerance));
        os << buf;
        fails += !r.passed;
    }
    os << rs.size() << " checks, " << fails << " failed\n";
}

inline void write_csv(const std::vector<VerificationReport>& rs, std::ostream& os) {
    os << "name,kind,passed,predicted,measured,tolerance\n";
    char buf[512];
    for (const auto& r : rs) {
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%.12g,%.12g,%.12g\n", r.name.c_str(), r.kind.c_str(), int(r.passed),
                      round12(r.predicted), round12(r.measured), round12(r.tolerance));
        os << buf;
    }
}

}  // namespace gexp
