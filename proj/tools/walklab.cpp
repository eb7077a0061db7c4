#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "walklab/runner.hpp"

namespace {

// Shared flags are registered on every subcommand so they can be given in
// either position: `walklab --seed 7 survival` is rejected, but
// `walklab survival --seed 7` and config-file defaults both work.
struct SharedFlags {
    std::string config_path;
    std::string out_dir;
    std::string mode;
    std::uint64_t seed = 0;
    std::uint64_t paths = 0;
    unsigned workers = 0;
};

void add_shared(CLI::App* sub, SharedFlags& f) {
    sub->add_option("--config", f.config_path, "JSON config file");
    sub->add_option("--seed", f.seed, "master seed (overrides config)");
    sub->add_option("--workers", f.workers, "worker threads (0 = hardware default)");
    sub->add_option("--out", f.out_dir, "output directory (overrides config)");
    sub->add_option("--paths", f.paths, "Monte Carlo replicate count (overrides config)");
    sub->add_option("--mode", f.mode, "computation mode")
        ->check(CLI::IsMember({"mc", "dp", "both"}));
}

int fail_before_run(const std::string& subcommand, const std::string& out_dir,
                    const walklab::Error& e) {
    walklab::Json summary{{"tool", "walklab"},
                          {"version", walklab::version_string},
                          {"subcommand", subcommand},
                          {"status", "error"},
                          {"error",
                           {{"code", walklab::errc_name(e.code())}, {"message", e.what()}}}};
    try {
        std::filesystem::path out = out_dir.empty() ? "." : out_dir;
        std::error_code ec;
        std::filesystem::create_directories(out, ec);
        walklab::detail::write_summary(out / "summary.json", summary);
    } catch (...) {
    }
    std::cerr << "walklab: " << e.what() << "\n";
    return e.is_config_error() ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"survival statistics for absorbed random walks"};
    app.set_version_flag("--version", std::string("walklab ") + walklab::version_string);
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "run paths and report survival at a single horizon"},
        {"survival", "estimate the survival curve over a horizon grid"},
        {"exponent", "fit the survival decay exponent"},
        {"c-const", "estimate the one-crossing constant from first-crossing overshoots"},
        {"u-fn", "estimate the harmonic-like weight u(y)"},
        {"v-const", "estimate the crossing-series constant V(x)"},
        {"rho", "estimate the conditional probability of ending nonnegative"},
        {"oracle", "exact lattice computations (dp and exhaustive enumeration)"},
        {"check", "run a convergence or shape diagnostic (c1..c4)"},
    };

    SharedFlags flags;
    std::string condition;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, blurb] : commands) {
        CLI::App* sub = app.add_subcommand(name, blurb);
        add_shared(sub, flags);
        subs[name] = sub;
    }
    subs["check"]->add_option("condition", condition, "which condition to check (c1..c4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    walklab::RunConfig cfg;
    try {
        if (!flags.config_path.empty()) cfg = walklab::RunConfig::load(flags.config_path);
    } catch (const walklab::Error& e) {
        return fail_before_run(name, flags.out_dir, e);
    }

    if (sub->count("--seed")) cfg.seed = flags.seed;
    if (sub->count("--paths")) cfg.total_paths = flags.paths;
    if (sub->count("--mode")) cfg.mode = flags.mode;
    if (sub->count("--out")) cfg.out_dir = flags.out_dir;
    if (name == "check" && sub->count("condition")) cfg.check.condition = condition;
    unsigned workers = sub->count("--workers") ? flags.workers : 0;

    walklab::RunOutcome res = walklab::run(name, cfg, workers);
    if (res.exit_code == 0) {
        std::cout << res.summary.dump(2) << "\n";
    } else {
        std::cerr << "walklab: " << res.summary["error"]["message"].get<std::string>() << "\n";
    }
    return res.exit_code;
}
