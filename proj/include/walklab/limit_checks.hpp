#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/estimators.hpp"
#include "walklab/lattice_oracle.hpp"

namespace walklab {

// Diagnostics for the four convergence conditions behind the n^{-1/2}
// survival law and for the endpoint (time-1) marginal against the Rayleigh
// law of the Brownian meander.

enum class Verdict { pass, fail, inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct ConditionReport {
    std::string condition;                                   // "c1".."c4"
    std::vector<std::string> columns;                        // table schema
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, double>> fitted;      // condition-specific outputs
    std::vector<std::pair<std::string, double>> thresholds;  // echoed pass criteria
    Verdict verdict = Verdict::fail;

    bool pass() const { return verdict == Verdict::pass; }
};

// Time-1 marginal of the standard Brownian meander.
inline double rayleigh_cdf(double z) {
    require(z >= 0.0, Errc::bad_argument, "rayleigh cdf needs a nonnegative argument");
    return -std::expm1(-0.5 * z * z);
}

inline double rayleigh_quantile(double p) {
    require(p >= 0.0 && p < 1.0, Errc::bad_argument, "quantile level must lie in [0, 1)");
    return std::sqrt(-2.0 * std::log1p(-p));
}

// One-sample Kolmogorov-Smirnov statistic. The sample is copied and sorted.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
    require(!sample.empty(), Errc::bad_argument, "ks statistic needs a nonempty sample");
    std::sort(sample.begin(), sample.end());
    const double m = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        double f = cdf(sample[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / m));
        d = std::max(d, std::abs(f - static_cast<double>(i) / m));
    }
    return d;
}

// Weighted variant for exact atom distributions. Weights are normalized by
// their total, so a sign class carrying only part of the surviving mass is
// still compared as a conditional law.
template <class Cdf>
double ks_statistic_weighted(std::vector<double> values, std::vector<double> weights, Cdf&& cdf) {
    require(!values.empty() && values.size() == weights.size(), Errc::bad_argument,
            "weighted ks needs matching nonempty values and weights");
    double total = 0.0;
    for (double w : weights) {
        require(w >= 0.0, Errc::bad_argument, "weights must be nonnegative");
        total += w;
    }
    require(total > 0.0, Errc::bad_argument, "weights must carry some mass");

    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double d = 0.0, cum = 0.0;
    for (std::size_t i : order) {
        double f = cdf(values[i]);
        d = std::max(d, std::abs(f - cum));
        cum += weights[i] / total;
        d = std::max(d, std::abs(f - cum));
    }
    return d;
}

namespace detail {

// Crossing counter that stops once the k_stop-th crossing is recorded.
struct CrossingCounter {
    std::uint32_t k_stop;
    bool on_crossing(std::uint32_t k, std::uint64_t, double) { return k < k_stop; }
    void on_position(std::uint64_t, double) {}
};

}  // namespace detail

inline constexpr double c1_default_r2_min = 0.98;
inline constexpr double c2_default_tolerance = 0.05;
inline constexpr double c2_zero_floor = 0.01;  // relative gaps are measured against at least this
inline constexpr double c3_default_epsilon = 0.05;
inline constexpr double c4_default_ks_threshold = 0.05;
inline constexpr double c4_min_class_fraction = 0.05;

// C1: the survival chain P_x(tau >= T_k) must decay geometrically in k.
// Fits log estimate on k; gamma-hat = exp(slope). Pass needs the decay
// bounded away from 1 and a close fit.
inline ConditionReport check_c1(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                std::uint32_t k_max, std::uint64_t total_paths, std::uint64_t seed,
                                unsigned workers = 1, std::uint64_t step_cap = default_step_cap,
                                double r2_min = c1_default_r2_min) {
    require(k_max >= 2, Errc::bad_argument, "the decay fit needs k_max >= 2");
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");

    struct Acc {
        std::vector<std::uint64_t> reached;   // index k-1 counts tau >= T_k
        std::vector<std::uint64_t> censored;  // capped while holding exactly k crossings
        std::uint64_t capped = 0;
        void merge(const Acc& o) {
            for (std::size_t i = 0; i < reached.size(); ++i) reached[i] += o.reached[i];
            for (std::size_t i = 0; i < censored.size(); ++i) censored[i] += o.censored[i];
            capped += o.capped;
        }
    };
    Acc init;
    init.reached.assign(k_max, 0);
    init.censored.assign(k_max, 0);
    Acc acc = parallel_accumulate(total_paths, workers, init, [&](Acc& a, std::uint64_t r) {
        detail::CrossingCounter obs{k_max};
        PathEnd end = run_path(x, law, mech, step_cap, RandomStream::for_replicate(seed, r), obs);
        if (!end.absorbed_at && !end.stopped_by_observer) {
            ++a.capped;
            // right-censored: the path is alive but unobserved past its cap,
            // so it leaves the at-risk set for later crossings
            if (end.crossings < k_max) ++a.censored[end.crossings];
        }
        for (std::uint32_t k = 1; k <= end.crossings; ++k) ++a.reached[k - 1];
    });
    detail::check_capped(acc.capped, total_paths, "crossing chain");

    ConditionReport rep;
    rep.condition = "c1";
    rep.columns = {"k", "estimate", "ci_low", "ci_high"};
    std::vector<double> ks, logs, ws;
    std::uint64_t at_risk = total_paths;
    for (std::uint32_t k = 1; k <= k_max; ++k) {
        at_risk -= acc.censored[k - 1];
        std::uint64_t s = acc.reached[k - 1];
        IntervalEstimate w = wilson_interval(s, at_risk);
        rep.rows.push_back({static_cast<double>(k), w.estimate, w.lo, w.hi});
        if (s == 0) continue;  // unreachable crossings carry no fit information
        ks.push_back(static_cast<double>(k));
        logs.push_back(std::log(w.estimate));
        ws.push_back(log_estimate_weight(w.estimate, at_risk));
    }
    require(ks.size() >= 2, Errc::zero_survival, "fewer than two crossing counts are nonzero");

    LineFit fit = weighted_line_fit(ks, logs, ws);
    double gamma = std::exp(fit.slope);
    double gamma_stderr = gamma * fit.slope_stderr;
    rep.fitted = {{"slope", fit.slope},
                  {"gamma_hat", gamma},
                  {"gamma_stderr", gamma_stderr},
                  {"r_squared", fit.r2},
                  {"capped_paths", static_cast<double>(acc.capped)}};
    rep.thresholds = {{"gamma_plus_2se_below", 1.0}, {"r2_min", r2_min}};
    rep.verdict = (gamma + 2.0 * gamma_stderr < 1.0 && fit.r2 >= r2_min) ? Verdict::pass : Verdict::fail;
    return rep;
}

namespace detail {

struct C2Table {
    double y = 0.0;
    std::vector<double> values, lo, hi;  // sqrt(n)-scaled, one entry per horizon
};

inline ConditionReport c2_report(const std::vector<std::uint64_t>& n_grid,
                                 const std::vector<C2Table>& tables, bool exact, double tol) {
    require(n_grid.size() >= 4, Errc::bad_argument, "the convergence check needs at least four horizons");

    ConditionReport rep;
    rep.condition = "c2";
    rep.columns = {"y", "n", "value", "ci_low", "ci_high"};
    double gap = 0.0;
    bool overlap_all = true;
    for (const C2Table& t : tables) {
        for (std::size_t i = 0; i < n_grid.size(); ++i)
            rep.rows.push_back({t.y, static_cast<double>(n_grid[i]), t.values[i], t.lo[i], t.hi[i]});
        std::size_t m = n_grid.size();
        double last = t.values[m - 1], prev = t.values[m - 2];
        double denom = std::max({std::abs(last), std::abs(prev), c2_zero_floor});
        gap = std::max(gap, std::abs(last - prev) / denom);
        if (!exact) overlap_all &= t.lo[m - 1] <= t.hi[m - 2] && t.lo[m - 2] <= t.hi[m - 1];
    }
    rep.fitted = {{"gap", gap}};
    rep.thresholds = {{"tolerance", tol}, {"zero_floor", c2_zero_floor}};
    if (gap > tol)
        rep.verdict = Verdict::fail;
    else if (exact || overlap_all)
        rep.verdict = Verdict::pass;
    else
        rep.verdict = Verdict::inconclusive;
    return rep;
}

}  // namespace detail

// C2: sqrt(n) P_y(tau > n, T_1 > n) must stabilize in n for every y on the
// grid. The gap is the relative change between the last two horizons,
// measured against a floor so that convergence to zero still counts.
inline ConditionReport check_c2(const std::vector<double>& y_grid, const IncrementLaw& law,
                                const SegmentMechanism& mech, const std::vector<std::uint64_t>& n_grid,
                                std::uint64_t total_paths, std::uint64_t seed, unsigned workers = 1,
                                double tol = c2_default_tolerance) {
    detail::check_horizons(n_grid);
    require(!y_grid.empty(), Errc::bad_argument, "need at least one start point");
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");

    std::vector<detail::C2Table> tables;
    for (double y : y_grid) {
        detail::C2Table t;
        t.y = y;
        detail::CountsAcc init;
        init.counts.assign(n_grid.size(), 0);
        detail::CountsAcc acc =
            parallel_accumulate(total_paths, workers, init, [&](detail::CountsAcc& a, std::uint64_t r) {
                detail::FirstCrossingStop obs;
                PathEnd end = run_path(y, law, mech, n_grid.back(), RandomStream::for_replicate(seed, r), obs);
                // The event {tau > n, T_1 > n} holds iff neither a crossing
                // nor an absorption happened by time n.
                std::uint64_t stop = end.stopped_by_observer ? end.steps
                                     : end.absorbed_at       ? *end.absorbed_at
                                                             : n_grid.back() + 1;
                for (std::size_t i = 0; i < n_grid.size(); ++i)
                    if (stop > n_grid[i]) ++a.counts[i];
            });
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            double root_n = std::sqrt(static_cast<double>(n_grid[i]));
            IntervalEstimate w = wilson_interval(acc.counts[i], total_paths);
            t.values.push_back(root_n * w.estimate);
            t.lo.push_back(root_n * w.lo);
            t.hi.push_back(root_n * w.hi);
        }
        tables.push_back(std::move(t));
    }
    return detail::c2_report(n_grid, tables, false, tol);
}

// Exact-oracle variant of check_c2 on lattice laws.
inline ConditionReport check_c2_dp(const std::vector<double>& y_grid, const IncrementLaw& law,
                                   const SegmentMechanism& mech, const std::vector<std::uint64_t>& n_grid,
                                   double tol = c2_default_tolerance) {
    detail::check_horizons(n_grid);
    require(!y_grid.empty(), Errc::bad_argument, "need at least one start point");
    std::vector<detail::C2Table> tables;
    for (double y : y_grid) {
        detail::C2Table t;
        t.y = y;
        std::vector<double> p = oracle::dp_no_crossing_survival(y, law, mech, n_grid);
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            double v = std::sqrt(static_cast<double>(n_grid[i])) * p[i];
            t.values.push_back(v);
            t.lo.push_back(v);
            t.hi.push_back(v);
        }
        tables.push_back(std::move(t));
    }
    return detail::c2_report(n_grid, tables, true, tol);
}

// C3: sqrt(n) P_x(tau > n) must stay bounded away from zero. Works on any
// survival curve (Monte Carlo or oracle).
inline ConditionReport check_c3(const SurvivalCurve& curve, double epsilon = c3_default_epsilon) {
    require(curve.horizons.size() >= 4, Errc::bad_argument,
            "the lower-bound check needs at least four horizons");
    require(epsilon > 0.0, Errc::bad_argument, "epsilon must be positive");

    ConditionReport rep;
    rep.condition = "c3";
    rep.columns = {"n", "value", "ci_low", "ci_high"};
    double min_lo = std::numeric_limits<double>::infinity();
    double min_value = min_lo;
    for (std::size_t i = 0; i < curve.horizons.size(); ++i) {
        double root_n = std::sqrt(static_cast<double>(curve.horizons[i]));
        double v = root_n * curve.estimates[i];
        double lo = root_n * curve.ci_low[i];
        rep.rows.push_back({static_cast<double>(curve.horizons[i]), v, lo, root_n * curve.ci_high[i]});
        min_lo = std::min(min_lo, lo);
        min_value = std::min(min_value, v);
    }
    rep.fitted = {{"min_value", min_value}, {"min_ci_low", min_lo}};
    rep.thresholds = {{"epsilon", epsilon}};
    rep.verdict = min_lo > epsilon ? Verdict::pass : Verdict::fail;
    return rep;
}

inline ConditionReport check_c3(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                const std::vector<std::uint64_t>& n_grid, std::uint64_t total_paths,
                                std::uint64_t seed, unsigned workers = 1,
                                double epsilon = c3_default_epsilon) {
    return check_c3(estimate_survival(x, law, mech, n_grid, total_paths, seed, workers), epsilon);
}

struct C4Result {
    ConditionReport report;
    std::vector<double> endpoints;      // scaled endpoints z = S_n / (sigma sqrt(n))
    std::vector<double> endpoint_mass;  // per-atom conditional mass (oracle mode only)

    bool pass() const { return report.pass(); }
};

namespace detail {

struct SignClass {
    double sign = 1.0;
    std::vector<double> abs_z;
    std::vector<double> mass;  // empty for samples
    double weight = 0.0;       // fraction of survivors
};

inline C4Result c4_report(std::vector<SignClass> classes, double rho, double rho_lo, double rho_hi,
                          double survivors, double ks_thresh) {
    C4Result out;
    out.report.condition = "c4";
    out.report.columns = {"sign", "weight", "ks", "qualifying"};
    double ks_max = 0.0;
    bool all_pass = true;
    for (const SignClass& c : classes) {
        if (c.abs_z.empty()) continue;
        double d = c.mass.empty() ? ks_statistic(c.abs_z, rayleigh_cdf)
                                  : ks_statistic_weighted(c.abs_z, c.mass, rayleigh_cdf);
        bool qualifying = c.weight >= c4_min_class_fraction;
        if (qualifying) {
            ks_max = std::max(ks_max, d);
            all_pass &= d <= ks_thresh;
        }
        out.report.rows.push_back({c.sign, c.weight, d, qualifying ? 1.0 : 0.0});
    }
    out.report.fitted = {{"rho_hat", rho},
                         {"rho_ci_low", rho_lo},
                         {"rho_ci_high", rho_hi},
                         {"ks_max", ks_max},
                         {"survivors", survivors}};
    out.report.thresholds = {{"ks_threshold", ks_thresh}, {"min_class_fraction", c4_min_class_fraction}};
    out.report.verdict = all_pass ? Verdict::pass : Verdict::fail;
    return out;
}

}  // namespace detail

// C4 / endpoint marginal: conditional on survival to time n, the scaled
// endpoint S_n / (sigma sqrt(n)) splits by sign into Rayleigh-sized halves.
// Each sign class holding at least 5% of survivors must sit within the KS
// threshold of the Rayleigh law; the sign split itself is the rho estimate.
inline C4Result check_c4_endpoint(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                  std::uint64_t n, std::uint64_t total_paths, std::uint64_t survivor_target,
                                  std::uint64_t seed, unsigned workers = 1,
                                  double ks_thresh = c4_default_ks_threshold) {
    require(n >= 1, Errc::bad_argument, "horizon must be at least 1");
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");
    require(survivor_target >= 1, Errc::bad_argument, "survivor target must be at least 1");

    struct Acc {
        std::vector<double> z;
        void merge(const Acc& o) { z.insert(z.end(), o.z.begin(), o.z.end()); }
    };
    const double scale = 1.0 / (law.sigma() * std::sqrt(static_cast<double>(n)));
    Acc acc = parallel_accumulate(total_paths, workers, Acc{}, [&](Acc& a, std::uint64_t r) {
        NullObserver obs;
        PathEnd end = run_path(x, law, mech, n, RandomStream::for_replicate(seed, r), obs);
        if (!end.absorbed_at) a.z.push_back(end.position * scale);
    });
    require(acc.z.size() >= survivor_target, Errc::too_few_survivors,
            "expected at least " + std::to_string(survivor_target) + " surviving paths, got " +
                std::to_string(acc.z.size()));

    detail::SignClass pos{1.0, {}, {}, 0.0}, neg{-1.0, {}, {}, 0.0};
    std::uint64_t nonneg = 0;
    for (double z : acc.z) {
        if (z >= 0.0) {
            pos.abs_z.push_back(z);
            ++nonneg;
        } else {
            neg.abs_z.push_back(-z);
        }
    }
    double m = static_cast<double>(acc.z.size());
    pos.weight = static_cast<double>(pos.abs_z.size()) / m;
    neg.weight = static_cast<double>(neg.abs_z.size()) / m;
    IntervalEstimate rho = wilson_interval(nonneg, acc.z.size());

    C4Result out = detail::c4_report({pos, neg}, rho.estimate, rho.lo, rho.hi, m, ks_thresh);
    out.endpoints = std::move(acc.z);
    return out;
}

// Exact-oracle variant: the endpoint distribution comes from the lattice
// recursion and the KS statistic is taken over weighted atoms.
inline C4Result check_c4_endpoint_dp(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                     std::uint64_t n, double ks_thresh = c4_default_ks_threshold) {
    oracle::EndpointDistribution dist = oracle::dp_endpoint_distribution(x, law, mech, n);
    const double scale = dist.span / (law.sigma() * std::sqrt(static_cast<double>(n)));

    detail::SignClass pos{1.0, {}, {}, 0.0}, neg{-1.0, {}, {}, 0.0};
    C4Result out;
    for (std::size_t i = 0; i < dist.positions.size(); ++i) {
        double z = static_cast<double>(dist.positions[i]) * scale;
        out.endpoints.push_back(z);
        out.endpoint_mass.push_back(dist.mass[i]);
        if (z >= 0.0) {
            pos.abs_z.push_back(z);
            pos.mass.push_back(dist.mass[i]);
            pos.weight += dist.mass[i];
        } else {
            neg.abs_z.push_back(-z);
            neg.mass.push_back(dist.mass[i]);
            neg.weight += dist.mass[i];
        }
    }
    // Renormalize each class to a probability law for the KS comparison.
    for (detail::SignClass* c : {&pos, &neg})
        if (c->weight > 0.0)
            for (double& w : c->mass) w /= c->weight;

    C4Result rep = detail::c4_report({pos, neg}, pos.weight, pos.weight, pos.weight,
                                     dist.survival, ks_thresh);
    rep.endpoints = std::move(out.endpoints);
    rep.endpoint_mass = std::move(out.endpoint_mass);
    return rep;
}

}  // namespace walklab
