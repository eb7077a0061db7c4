#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "walklab/config.hpp"
#include "walklab/csv.hpp"
#include "walklab/estimators.hpp"
#include "walklab/lattice_oracle.hpp"
#include "walklab/limit_checks.hpp"
#include "walklab/mechanism.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// Subcommand orchestration shared by the CLI binary and the tests: executes
// the requested operation, writes summary.json plus the table CSVs into the
// configured output directory, and maps errors onto exit codes (2 for
// spec/config problems, 3 for runtime failures).

struct RunOutcome {
    int exit_code = 0;
    Json summary;
};

namespace detail {

inline void append_curve_rows(Csv& csv, const SurvivalCurve& c) {
    for (std::size_t i = 0; i < c.horizons.size(); ++i) {
        auto& row = csv.add_row();
        row.push_back(num17(c.x));
        row.push_back(std::to_string(c.horizons[i]));
        row.push_back(std::to_string(c.survivors[i]));
        row.push_back(std::to_string(c.total_paths));
        row.push_back(num17(c.estimates[i]));
        row.push_back(num17(c.ci_low[i]));
        row.push_back(num17(c.ci_high[i]));
    }
}

inline Csv survival_csv(const std::vector<SurvivalCurve>& curves) {
    Csv csv;
    csv.header = {"x", "n", "survivors", "total", "estimate", "ci_low", "ci_high"};
    for (const SurvivalCurve& c : curves) append_curve_rows(csv, c);
    return csv;
}

inline Json fit_json(const LineFit& f) {
    return Json{{"slope", f.slope},
                {"intercept", f.intercept},
                {"slope_stderr", f.slope_stderr},
                {"r_squared", f.r2}};
}

inline Json pairs_json(const std::vector<std::pair<std::string, double>>& pairs) {
    Json j = Json::object();
    for (const auto& [k, v] : pairs) j[k] = v;
    return j;
}

inline Json report_json(const ConditionReport& rep) {
    return Json{{"condition", rep.condition},
                {"verdict", verdict_name(rep.verdict)},
                {"pass", rep.pass()},
                {"fitted", pairs_json(rep.fitted)},
                {"thresholds", pairs_json(rep.thresholds)}};
}

inline Csv report_csv(const ConditionReport& rep) {
    Csv csv;
    csv.header = rep.columns;
    for (const auto& row : rep.rows) {
        auto& out = csv.add_row();
        for (double v : row) out.push_back(num17(v));
    }
    return csv;
}

inline void write_endpoints_csv(const std::filesystem::path& path, const std::vector<double>& z) {
    Csv csv;
    csv.header = {"value", "sign"};
    for (double v : z) {
        auto& row = csv.add_row();
        row.push_back(num17(v));
        row.push_back(v >= 0.0 ? "1" : "-1");
    }
    write_csv(path, csv);
}

inline void require_mode(const RunConfig& cfg, std::initializer_list<const char*> allowed,
                         const char* subcommand) {
    for (const char* m : allowed)
        if (cfg.mode == m) return;
    fail(Errc::invalid_spec,
         std::string(subcommand) + " does not support mode '" + cfg.mode + "'");
}

inline void require_lattice(const IncrementLaw& law, const char* what) {
    require(law.is_lattice(), Errc::invalid_spec,
            std::string(what) + " needs a lattice increment law (rademacher or lattice)");
}

inline double paired_z(double mc, double dp, std::uint64_t total) {
    double var = dp * (1.0 - dp);
    double se = std::sqrt(var / static_cast<double>(total));
    double diff = mc - dp;
    if (se > 0.0) return diff / se;
    return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (diff > 0 ? 1.0 : -1.0);
}

inline Json run_simulate(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out) {
    require_mode(cfg, {"mc"}, "simulate");
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    const double x = cfg.x.front();
    const std::uint64_t n = cfg.simulate.n;

    struct Acc {
        std::uint64_t survivors = 0;
        RunningStats crossings;
        void merge(const Acc& o) {
            survivors += o.survivors;
            crossings.merge(o.crossings);
        }
    };
    Acc acc = parallel_accumulate(cfg.total_paths, workers, Acc{}, [&](Acc& a, std::uint64_t r) {
        NullObserver obs;
        PathEnd end = run_path(x, law, mech, n, RandomStream::for_replicate(cfg.seed, r), obs);
        if (!end.absorbed_at) ++a.survivors;
        a.crossings.add(static_cast<double>(end.crossings));
    });

    if (cfg.simulate.trajectory) {
        PathOutcome path = simulate_path(x, law, mech, n, RandomStream::for_replicate(cfg.seed, 0), true);
        Csv csv;
        csv.header = {"t", "position"};
        for (std::size_t t = 0; t < path.trajectory.size(); ++t) {
            auto& row = csv.add_row();
            row.push_back(std::to_string(t));
            row.push_back(num17(path.trajectory[t]));
        }
        write_csv(out / "trajectory.csv", csv);
    }

    IntervalEstimate w = wilson_interval(acc.survivors, cfg.total_paths);
    return Json{{"x", x},
                {"n", n},
                {"survivors", acc.survivors},
                {"total", cfg.total_paths},
                {"estimate", w.estimate},
                {"ci_low", w.lo},
                {"ci_high", w.hi},
                {"mean_crossings", acc.crossings.mean}};
}

// Shared by `survival` and `exponent`: computes the per-mode curves and
// writes survival.csv (plus the dp and paired-difference tables for `both`).
inline void emit_curves(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out,
                        std::vector<SurvivalCurve>& mc, std::vector<SurvivalCurve>& dp) {
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    std::vector<std::uint64_t> horizons = cfg.horizons.build();
    const bool want_mc = cfg.mode == "mc" || cfg.mode == "both";
    const bool want_dp = cfg.mode == "dp" || cfg.mode == "both";
    if (want_dp) require_lattice(law, "dp mode");

    for (double x : cfg.x) {
        if (want_mc)
            mc.push_back(estimate_survival(x, law, mech, horizons, cfg.total_paths, cfg.seed, workers));
        if (want_dp) dp.push_back(oracle::dp_curve(x, law, mech, horizons));
    }

    write_csv(out / "survival.csv", detail::survival_csv(want_mc ? mc : dp));
    if (want_mc && want_dp) {
        write_csv(out / "survival_dp.csv", detail::survival_csv(dp));
        Csv diff;
        diff.header = {"x", "n", "mc", "dp", "diff", "z"};
        for (std::size_t c = 0; c < mc.size(); ++c) {
            for (std::size_t i = 0; i < horizons.size(); ++i) {
                auto& row = diff.add_row();
                double m = mc[c].estimates[i], d = dp[c].estimates[i];
                row.push_back(num17(mc[c].x));
                row.push_back(std::to_string(horizons[i]));
                row.push_back(num17(m));
                row.push_back(num17(d));
                row.push_back(num17(m - d));
                row.push_back(num17(paired_z(m, d, cfg.total_paths)));
            }
        }
        write_csv(out / "survival_diff.csv", diff);
    }
}

inline Json run_survival(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out) {
    require_mode(cfg, {"mc", "dp", "both"}, "survival");
    std::vector<SurvivalCurve> mc, dp;
    emit_curves(cfg, workers, out, mc, dp);

    Json curves = Json::array();
    for (std::size_t c = 0; c < cfg.x.size(); ++c) {
        Json e;
        e["x"] = cfg.x[c];
        const SurvivalCurve& any = mc.empty() ? dp[c] : mc[c];
        e["n_last"] = any.horizons.back();
        if (!mc.empty()) {
            e["mc_estimate_last"] = mc[c].estimates.back();
            e["mc_survivors_last"] = mc[c].survivors.back();
        }
        if (!dp.empty()) e["dp_estimate_last"] = dp[c].estimates.back();
        if (!mc.empty() && !dp.empty()) {
            double worst = 0.0;
            for (std::size_t i = 0; i < mc[c].estimates.size(); ++i) {
                double z = paired_z(mc[c].estimates[i], dp[c].estimates[i], cfg.total_paths);
                if (std::abs(z) > std::abs(worst)) worst = z;
            }
            e["max_abs_z"] = std::abs(worst);
        }
        curves.push_back(e);
    }
    return Json{{"curves", curves}};
}

inline Json run_exponent(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out) {
    require_mode(cfg, {"mc", "dp", "both"}, "exponent");
    std::vector<SurvivalCurve> mc, dp;
    emit_curves(cfg, workers, out, mc, dp);

    Json fits = Json::array();
    for (std::size_t c = 0; c < cfg.x.size(); ++c) {
        if (!mc.empty()) {
            Json e = fit_json(fit_exponent(mc[c]));
            e["x"] = cfg.x[c];
            e["mode"] = "mc";
            fits.push_back(e);
        }
        if (!dp.empty()) {
            Json e = fit_json(fit_exponent(dp[c]));
            e["x"] = cfg.x[c];
            e["mode"] = "dp";
            fits.push_back(e);
        }
    }
    return Json{{"fits", fits}};
}

inline Json run_c_const(const RunConfig& cfg, unsigned workers, const std::filesystem::path&) {
    require_mode(cfg, {"mc"}, "c-const");
    IncrementLaw law = cfg.increment.build();
    Json rows = Json::array();
    for (double x : cfg.x) {
        CEstimate c = estimate_c(x, law, cfg.total_paths, cfg.seed, workers, cfg.step_cap);
        rows.push_back(Json{{"x", x},
                            {"value", c.value},
                            {"value_stderr", c.value_stderr},
                            {"overshoot_mean", c.overshoot_mean},
                            {"overshoot_stderr", c.overshoot_stderr},
                            {"used_paths", c.used_paths},
                            {"capped_paths", c.capped_paths}});
    }
    return Json{{"estimates", rows}};
}

inline Json run_u_fn(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out) {
    require_mode(cfg, {"mc", "dp", "both"}, "u-fn");
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    const bool want_mc = cfg.mode == "mc" || cfg.mode == "both";
    const bool want_dp = cfg.mode == "dp" || cfg.mode == "both";
    if (want_dp) require_lattice(law, "dp mode");

    Csv csv;
    csv.header = {"y", "n_large", "mode", "value", "ci_low", "ci_high"};
    Json rows = Json::array();
    auto add = [&](double y, const char* mode, double v, double lo, double hi) {
        auto& row = csv.add_row();
        row.push_back(num17(y));
        row.push_back(std::to_string(cfg.u_fn.n_large));
        row.push_back(mode);
        row.push_back(num17(v));
        row.push_back(num17(lo));
        row.push_back(num17(hi));
        rows.push_back(Json{{"y", y}, {"mode", mode}, {"value", v}, {"ci_low", lo}, {"ci_high", hi}});
    };
    for (double y : cfg.u_fn.y_grid) {
        if (want_mc) {
            UEstimate u = estimate_u(y, law, mech, cfg.u_fn.n_large, cfg.total_paths, cfg.seed, workers);
            add(y, "mc", u.value, u.lo, u.hi);
        }
        if (want_dp) {
            double v = oracle::dp_u(y, law, mech, cfg.u_fn.n_large);
            add(y, "dp", v, v, v);
        }
    }
    write_csv(out / "u_values.csv", csv);
    return Json{{"values", rows}};
}

inline Json run_v_const(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out) {
    require_mode(cfg, {"mc"}, "v-const");
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    require_lattice(law, "the dp-backed u-provider");
    UProvider u = oracle::make_dp_u_provider(law, mech, cfg.v_const.n_large, cfg.v_const.u_lo,
                                             cfg.v_const.u_hi);
    VEstimate v = estimate_V(cfg.x.front(), law, mech, u, cfg.v_const.k_max, cfg.total_paths, cfg.seed,
                             workers, cfg.step_cap);

    Csv csv;
    csv.header = {"k", "term", "ci"};
    for (std::size_t k = 0; k < v.terms.size(); ++k) {
        auto& row = csv.add_row();
        row.push_back(std::to_string(k));
        row.push_back(num17(v.terms[k]));
        row.push_back(num17(v.term_ci[k]));
    }
    write_csv(out / "v_terms.csv", csv);

    return Json{{"x", v.x},
                {"value", v.value},
                {"k_max", v.k_max},
                {"k_used", v.terms.size()},
                {"tail_bound_ratio", v.tail_bound_ratio},
                {"capped_paths", v.capped_paths}};
}

inline Json run_rho(const RunConfig& cfg, unsigned workers, const std::filesystem::path&) {
    require_mode(cfg, {"mc", "dp"}, "rho");
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    Json rows = Json::array();
    for (double x : cfg.x) {
        if (cfg.mode == "mc") {
            RhoEstimate r = estimate_rho(x, law, mech, cfg.rho.n, cfg.total_paths, cfg.seed, workers);
            rows.push_back(Json{{"x", x},
                                {"mode", "mc"},
                                {"value", r.value},
                                {"ci_low", r.lo},
                                {"ci_high", r.hi},
                                {"survivors", r.survivors},
                                {"nonneg", r.nonneg}});
        } else {
            require_lattice(law, "dp mode");
            oracle::EndpointDistribution dist = oracle::dp_endpoint_distribution(x, law, mech, cfg.rho.n);
            double rho = 0.0;
            for (std::size_t i = 0; i < dist.positions.size(); ++i)
                if (dist.positions[i] >= 0) rho += dist.mass[i];
            rows.push_back(
                Json{{"x", x}, {"mode", "dp"}, {"value", rho}, {"survival", dist.survival}});
        }
    }
    return Json{{"estimates", rows}};
}

inline Json run_oracle(const RunConfig& cfg, unsigned, const std::filesystem::path& out) {
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    require_lattice(law, "the oracle");
    const std::string& op = cfg.oracle.op;

    if (op == "survival" || op == "no-crossing") {
        std::vector<std::uint64_t> horizons = cfg.horizons.build();
        std::vector<SurvivalCurve> curves;
        for (double x : cfg.x) {
            if (op == "survival") {
                curves.push_back(oracle::dp_curve(x, law, mech, horizons));
            } else {
                SurvivalCurve c;
                c.x = x;
                c.horizons = horizons;
                c.survivors.assign(horizons.size(), 0);
                c.estimates = oracle::dp_no_crossing_survival(x, law, mech, horizons);
                c.ci_low = c.estimates;
                c.ci_high = c.estimates;
                curves.push_back(std::move(c));
            }
        }
        write_csv(out / "survival.csv", survival_csv(curves));
        Json rows = Json::array();
        for (const SurvivalCurve& c : curves)
            rows.push_back(Json{{"x", c.x}, {"n_last", c.horizons.back()}, {"estimate_last", c.estimates.back()}});
        return Json{{"op", op}, {"curves", rows}};
    }
    if (op == "u") {
        Csv csv;
        csv.header = {"y", "n_large", "mode", "value", "ci_low", "ci_high"};
        Json rows = Json::array();
        for (double y : cfg.u_fn.y_grid) {
            double v = oracle::dp_u(y, law, mech, cfg.u_fn.n_large);
            auto& row = csv.add_row();
            row.push_back(num17(y));
            row.push_back(std::to_string(cfg.u_fn.n_large));
            row.push_back("dp");
            row.push_back(num17(v));
            row.push_back(num17(v));
            row.push_back(num17(v));
            rows.push_back(Json{{"y", y}, {"value", v}});
        }
        write_csv(out / "u_values.csv", csv);
        return Json{{"op", op}, {"values", rows}};
    }
    if (op == "endpoint") {
        const double x = cfg.x.front();
        oracle::EndpointDistribution dist = oracle::dp_endpoint_distribution(x, law, mech, cfg.oracle.n);
        const double scale = dist.span / (law.sigma() * std::sqrt(static_cast<double>(cfg.oracle.n)));
        std::vector<double> z;
        double nonneg = 0.0;
        for (std::size_t i = 0; i < dist.positions.size(); ++i) {
            z.push_back(static_cast<double>(dist.positions[i]) * scale);
            if (dist.positions[i] >= 0) nonneg += dist.mass[i];
        }
        write_endpoints_csv(out / "endpoints.csv", z);
        return Json{{"op", op},
                    {"x", x},
                    {"n", cfg.oracle.n},
                    {"survival", dist.survival},
                    {"nonneg_mass", nonneg},
                    {"atoms", dist.positions.size()}};
    }
    if (op == "enumerate") {
        Json rows = Json::array();
        for (double x : cfg.x) {
            oracle::Rational r = oracle::enumerate_small(x, law, mech, cfg.oracle.n);
            std::ostringstream os;
            os << r;
            rows.push_back(Json{{"x", x},
                                {"n", cfg.oracle.n},
                                {"exact", os.str()},
                                {"value", boost::rational_cast<double>(r)}});
        }
        return Json{{"op", op}, {"values", rows}};
    }
    fail(Errc::invalid_spec, "unknown oracle op '" + op + "'");
}

inline Json run_check(const RunConfig& cfg, unsigned workers, const std::filesystem::path& out) {
    IncrementLaw law = cfg.increment.build();
    SegmentMechanism mech = build_mechanism(cfg.mechanism);
    const std::string& cond = cfg.check.condition;
    const double x = cfg.x.front();

    ConditionReport rep;
    if (cond == "c1") {
        require_mode(cfg, {"mc"}, "check c1");
        rep = check_c1(x, law, mech, cfg.check.k_max, cfg.total_paths, cfg.seed, workers, cfg.step_cap,
                       cfg.check.r2_min);
    } else if (cond == "c2") {
        require_mode(cfg, {"mc", "dp"}, "check c2");
        std::vector<std::uint64_t> n_grid = cfg.horizons.build();
        if (cfg.mode == "dp") {
            require_lattice(law, "dp mode");
            rep = check_c2_dp(cfg.check.y_grid, law, mech, n_grid, cfg.check.tolerance);
        } else {
            rep = check_c2(cfg.check.y_grid, law, mech, n_grid, cfg.total_paths, cfg.seed, workers,
                           cfg.check.tolerance);
        }
    } else if (cond == "c3") {
        require_mode(cfg, {"mc", "dp"}, "check c3");
        std::vector<std::uint64_t> n_grid = cfg.horizons.build();
        if (cfg.mode == "dp") {
            require_lattice(law, "dp mode");
            rep = check_c3(oracle::dp_curve(x, law, mech, n_grid), cfg.check.epsilon);
        } else {
            rep = check_c3(x, law, mech, n_grid, cfg.total_paths, cfg.seed, workers, cfg.check.epsilon);
        }
    } else if (cond == "c4") {
        require_mode(cfg, {"mc", "dp"}, "check c4");
        C4Result res;
        if (cfg.mode == "dp") {
            require_lattice(law, "dp mode");
            res = check_c4_endpoint_dp(x, law, mech, cfg.check.n, cfg.check.ks_threshold);
        } else {
            res = check_c4_endpoint(x, law, mech, cfg.check.n, cfg.total_paths,
                                    cfg.check.survivor_target, cfg.seed, workers,
                                    cfg.check.ks_threshold);
        }
        write_endpoints_csv(out / "endpoints.csv", res.endpoints);
        rep = std::move(res.report);
    } else {
        fail(Errc::invalid_spec, "unknown check condition '" + cond + "' (expected c1..c4)");
    }

    write_csv(out / ("conditions_" + rep.condition + ".csv"), report_csv(rep));
    return report_json(rep);
}

inline void write_summary(const std::filesystem::path& path, const Json& j) {
    std::ofstream outf(path, std::ios::binary | std::ios::trunc);
    require(outf.good(), Errc::io_error, "cannot open '" + path.string() + "' for writing");
    outf << j.dump(2) << '\n';
    outf.flush();
    require(outf.good(), Errc::io_error, "write to '" + path.string() + "' failed");
}

}  // namespace detail

inline RunOutcome run(const std::string& subcommand, const RunConfig& cfg, unsigned workers = 0) {
    const std::filesystem::path out = cfg.out_dir;
    RunOutcome outcome;
    outcome.summary["tool"] = "walklab";
    outcome.summary["version"] = version_string;
    outcome.summary["subcommand"] = subcommand;
    outcome.summary["seed"] = cfg.seed;
    outcome.summary["config"] = cfg.to_json();
    try {
        require(cfg.total_paths > 0, Errc::invalid_spec, "total_paths must be positive");
        std::error_code ec;
        std::filesystem::create_directories(out, ec);

        Json results;
        if (subcommand == "simulate")
            results = detail::run_simulate(cfg, workers, out);
        else if (subcommand == "survival")
            results = detail::run_survival(cfg, workers, out);
        else if (subcommand == "exponent")
            results = detail::run_exponent(cfg, workers, out);
        else if (subcommand == "c-const")
            results = detail::run_c_const(cfg, workers, out);
        else if (subcommand == "u-fn")
            results = detail::run_u_fn(cfg, workers, out);
        else if (subcommand == "v-const")
            results = detail::run_v_const(cfg, workers, out);
        else if (subcommand == "rho")
            results = detail::run_rho(cfg, workers, out);
        else if (subcommand == "oracle")
            results = detail::run_oracle(cfg, workers, out);
        else if (subcommand == "check")
            results = detail::run_check(cfg, workers, out);
        else
            fail(Errc::bad_argument, "unknown subcommand '" + subcommand + "'");

        outcome.summary["status"] = "ok";
        outcome.summary["results"] = results;
        detail::write_summary(out / "summary.json", outcome.summary);
        outcome.exit_code = 0;
    } catch (const Error& e) {
        outcome.summary["status"] = "error";
        outcome.summary["error"] = Json{{"code", errc_name(e.code())}, {"message", e.what()}};
        outcome.exit_code = e.is_config_error() ? 2 : 3;
        try {
            detail::write_summary(out / "summary.json", outcome.summary);
        } catch (...) {
            // the error is still reported through the exit code
        }
    }
    return outcome;
}

}  // namespace walklab
