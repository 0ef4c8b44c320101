#include <iostream>

#include "CLI11.hpp"
#include "gexp/cli.hpp"

using namespace gexp;

namespace {

VolatilityBand parse_band(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw InputError("--band expects LO,HI");
    try {
        return VolatilityBand(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const InputError*>(&e)) throw;
        throw InputError("--band expects two numbers");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust mean-variance hedging under volatility uncertainty"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    std::string band, claim_path, suite = "all";
    double dx = 0.0;
    bool no_auto_cfl = false;
    app.add_option("--band", band, "variance band LO,HI (overrides the claim file)");
    app.add_option("--depth", cfg.tree_depth, "scenario tree depth (1-14)");
    app.add_option("--vol-choices", cfg.vol_choice_count, "lattice volatility controls, extremes included");
    app.add_option("--grid-dx", dx, "PDE space step (0: automatic)");
    app.add_option("--half-width", cfg.pde.half_width_mult, "PDE half-width in sigma_hi sqrt(T) units");
    app.add_flag("--no-auto-cfl", no_auto_cfl, "use --dt instead of the stability bound");
    app.add_option("--dt", cfg.pde.dt, "PDE time step when auto-CFL is off");
    app.add_option("--seed", cfg.seed, "seed of the randomized suites");
    app.add_option("--out", cfg.out, "json | csv | table");

    auto* price = app.add_subcommand("price", "upper and lower prices, PDE and tree");
    price->add_option("--claim", claim_path, "claim JSON file")->required();
    auto* hedge_cmd = app.add_subcommand("hedge", "optimal mean-variance portfolio");
    hedge_cmd->add_option("--claim", claim_path, "claim JSON file")->required();
    auto* grid = app.add_subcommand("grid", "PDE grid dump as CSV");
    grid->add_option("--claim", claim_path, "claim JSON file")->required();
    auto* policy = app.add_subcommand("policy", "worst-case lattice policy as CSV");
    policy->add_option("--claim", claim_path, "claim JSON file")->required();
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("suite", suite, "all | jensen | estimates | optimality | bounds | convergence");
    verify->add_flag("--inject-bad", cfg.inject_bad, "add a deliberately shifted portfolio to the optimality suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return BadInput;
    }

    try {
        cfg.pde.dx = dx;
        cfg.pde.auto_cfl = !no_auto_cfl;
        if (!band.empty()) cfg.band = parse_band(band);
        if (*verify) return cmd_verify(suite, cfg, std::cout);
        const auto cf = load_claim(claim_path);
        if (*price) return cmd_price(cf, cfg, std::cout);
        if (*hedge_cmd) return cmd_hedge(cf, cfg, std::cout);
        if (*grid) return cmd_grid(cf, cfg, std::cout);
        return cmd_policy(cf, cfg, std::cout);
    } catch (const ResourceError& e) {
        std::cerr << "resource limit: " << e.what() << '\n';
        return ResourceLimit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return BadInput;
    }
}
