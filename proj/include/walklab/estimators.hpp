#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/increment_law.hpp"
#include "walklab/mechanism.hpp"
#include "walklab/parallel.hpp"
#include "walklab/rng.hpp"
#include "walklab/stats.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// Monte Carlo estimation of survival curves, the decay exponent, the
// classical crossing constant c_x, the one-segment limit u(y), the series
// constant V(x), and the endpoint sign weight rho. All estimators draw
// replicate r from RandomStream::for_replicate(seed, r) and accumulate in
// fixed block order, so outputs are bitwise independent of the worker count.

inline constexpr std::uint64_t default_step_cap = 10'000'000;

// Open-ended waits (first crossing, crossing chains) are censored at the
// step cap. Censored paths are counted and excluded; the run only aborts
// when they stop being rare.
inline constexpr double capped_fraction_limit = 0.01;

struct SurvivalCurve {
    double x = 0.0;
    std::vector<std::uint64_t> horizons;
    std::vector<std::uint64_t> survivors;
    std::uint64_t total_paths = 0;  // 0 marks an exact (oracle) curve
    std::vector<double> estimates;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
};

using ExponentFit = LineFit;

namespace detail {

inline void check_horizons(const std::vector<std::uint64_t>& horizons) {
    require(!horizons.empty(), Errc::bad_argument, "need at least one horizon");
    for (std::size_t i = 1; i < horizons.size(); ++i)
        require(horizons[i] > horizons[i - 1], Errc::bad_argument, "horizons must be strictly increasing");
}

struct CountsAcc {
    std::vector<std::uint64_t> counts;
    void merge(const CountsAcc& o) {
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    }
};

// Stops the walk right after the first side change is recorded.
struct FirstCrossingStop {
    double height = 0.0;
    bool found = false;
    bool on_crossing(std::uint32_t k, std::uint64_t, double h) {
        if (k == 0) return true;
        height = h;
        found = true;
        return false;
    }
    void on_position(std::uint64_t, double) {}
};

struct ChainObserver {
    std::vector<double>* heights;
    std::uint32_t k_stop;
    bool on_crossing(std::uint32_t k, std::uint64_t, double h) {
        heights->push_back(h);
        return k < k_stop;
    }
    void on_position(std::uint64_t, double) {}
};

inline void check_capped(std::uint64_t capped, std::uint64_t total, const char* what) {
    if (static_cast<double>(capped) > capped_fraction_limit * static_cast<double>(total))
        fail(Errc::step_cap_exhausted,
             std::string(what) + ": " + std::to_string(capped) + " of " + std::to_string(total) +
                 " paths exceeded the step cap");
}

}  // namespace detail

// Geometric horizon grid n_j = round(base * sqrt(2)^j), always ending
// exactly at max_n.
inline std::vector<std::uint64_t> geometric_horizons(std::uint64_t max_n, std::uint64_t base = 64) {
    require(base >= 1 && max_n >= base, Errc::bad_argument, "horizon maximum must be at least the base");
    std::vector<std::uint64_t> out;
    for (int j = 0;; ++j) {
        auto n = static_cast<std::uint64_t>(
            std::llround(static_cast<double>(base) * std::pow(std::numbers::sqrt2, j)));
        if (n > max_n) break;
        if (out.empty() || n > out.back()) out.push_back(n);
    }
    if (out.back() != max_n) out.push_back(max_n);
    return out;
}

// One pass per path up to the last horizon; the path is a survivor at n iff
// it is not absorbed by time n. Wilson 95% intervals per horizon.
inline SurvivalCurve estimate_survival(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                       const std::vector<std::uint64_t>& horizons, std::uint64_t total_paths,
                                       std::uint64_t seed, unsigned workers = 1) {
    detail::check_horizons(horizons);
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");
    const std::uint64_t max_h = horizons.back();

    detail::CountsAcc init;
    init.counts.assign(horizons.size(), 0);
    detail::CountsAcc acc =
        parallel_accumulate(total_paths, workers, init, [&](detail::CountsAcc& a, std::uint64_t r) {
            NullObserver obs;
            PathEnd end = run_path(x, law, mech, max_h, RandomStream::for_replicate(seed, r), obs);
            for (std::size_t i = 0; i < horizons.size(); ++i)
                if (!end.absorbed_at || *end.absorbed_at > horizons[i]) ++a.counts[i];
        });

    SurvivalCurve curve;
    curve.x = x;
    curve.horizons = horizons;
    curve.survivors = acc.counts;
    curve.total_paths = total_paths;
    for (std::uint64_t s : acc.counts) {
        IntervalEstimate w = wilson_interval(s, total_paths);
        curve.estimates.push_back(w.estimate);
        curve.ci_low.push_back(w.lo);
        curve.ci_high.push_back(w.hi);
    }
    return curve;
}

// Weighted least squares of log estimate on log n; weights are the inverse
// delta-method variances of the log estimates.
inline ExponentFit fit_exponent(const SurvivalCurve& curve) {
    std::vector<double> xs, ys, ws;
    for (std::size_t i = 0; i < curve.horizons.size(); ++i) {
        double p = curve.estimates[i];
        if (p <= 0.0)
            fail(Errc::zero_survival,
                 "survival estimate vanishes at n = " + std::to_string(curve.horizons[i]));
        xs.push_back(std::log(static_cast<double>(curve.horizons[i])));
        ys.push_back(std::log(p));
        ws.push_back(log_estimate_weight(p, curve.total_paths));
    }
    return weighted_line_fit(xs, ys, ws);
}

struct CEstimate {
    double value = 0.0;
    double value_stderr = 0.0;
    double overshoot_mean = 0.0;     // mean of S_{T_1}
    double overshoot_stderr = 0.0;
    std::uint64_t used_paths = 0;
    std::uint64_t capped_paths = 0;
};

// Classical crossing constant c_x = sqrt(2) |x - E_x[S_{T_1}]| / (sigma
// sqrt(pi)), estimated from absorption-free first crossings.
inline CEstimate estimate_c(double x, const IncrementLaw& law, std::uint64_t total_paths,
                            std::uint64_t seed, unsigned workers = 1,
                            std::uint64_t step_cap = default_step_cap) {
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");
    const SegmentMechanism free_walk{MechanismSpec{}};

    struct Acc {
        RunningStats overshoot;
        std::uint64_t capped = 0;
        void merge(const Acc& o) {
            overshoot.merge(o.overshoot);
            capped += o.capped;
        }
    };
    Acc acc = parallel_accumulate(total_paths, workers, Acc{}, [&](Acc& a, std::uint64_t r) {
        detail::FirstCrossingStop obs;
        run_path(x, law, free_walk, step_cap, RandomStream::for_replicate(seed, r), obs);
        if (obs.found)
            a.overshoot.add(obs.height);
        else
            ++a.capped;
    });

    require(acc.overshoot.n > 0, Errc::step_cap_exhausted, "no path crossed within the step cap");
    detail::check_capped(acc.capped, total_paths, "first-crossing wait");

    const double scale = std::numbers::sqrt2 / (law.sigma() * std::sqrt(std::numbers::pi));
    CEstimate out;
    out.overshoot_mean = acc.overshoot.mean;
    out.overshoot_stderr = acc.overshoot.stderr_mean();
    out.value = scale * std::abs(x - acc.overshoot.mean);
    out.value_stderr = scale * out.overshoot_stderr;
    out.used_paths = acc.overshoot.n;
    out.capped_paths = acc.capped;
    return out;
}

struct UEstimate {
    double y = 0.0;
    std::uint64_t n_large = 0;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::uint64_t survivors = 0;
    std::uint64_t total_paths = 0;  // 0 when the value is analytic
    bool analytic = false;
};

// sqrt(n) P_y(tau > n, T_1 > n) at n = n_large. Uses the mechanism's closed
// form when one exists and a c-provider is supplied; positions that are
// killed at time 0 with certainty short-circuit to an exact zero.
inline UEstimate estimate_u(double y, const IncrementLaw& law, const SegmentMechanism& mech,
                            std::uint64_t n_large, std::uint64_t total_paths, std::uint64_t seed,
                            unsigned workers = 1, const std::function<double(double)>& c_provider = {}) {
    require(n_large >= 1, Errc::bad_argument, "n_large must be at least 1");
    UEstimate out;
    out.y = y;
    out.n_large = n_large;

    if (c_provider) {
        if (std::optional<double> a = mech.analytic_u(y, c_provider)) {
            out.value = out.lo = out.hi = *a;
            out.analytic = true;
            return out;
        }
    }
    if (mech.always_kills_at_start(y, true)) {
        out.total_paths = total_paths;
        return out;  // zero with a zero-width interval
    }

    require(total_paths >= 1, Errc::bad_argument, "need at least one path");
    struct Acc {
        std::uint64_t survivors = 0;
        void merge(const Acc& o) { survivors += o.survivors; }
    };
    Acc acc = parallel_accumulate(total_paths, workers, Acc{}, [&](Acc& a, std::uint64_t r) {
        detail::FirstCrossingStop obs;
        PathEnd end = run_path(y, law, mech, n_large, RandomStream::for_replicate(seed, r), obs);
        if (!end.stopped_by_observer && !end.absorbed_at) ++a.survivors;
    });

    const double root_n = std::sqrt(static_cast<double>(n_large));
    IntervalEstimate w = wilson_interval(acc.survivors, total_paths);
    out.value = root_n * w.estimate;
    out.lo = root_n * w.lo;
    out.hi = root_n * w.hi;
    out.survivors = acc.survivors;
    out.total_paths = total_paths;
    return out;
}

// u(y) lookup used by estimate_V. Returns nothing when y is outside the
// provider's covered range; estimate_V turns that into an error naming the
// offending height.
using UProvider = std::function<std::optional<double>(double)>;

struct VEstimate {
    double x = 0.0;
    int k_max = 0;
    std::vector<double> terms;              // per-k estimates of E_x[u(H_k); tau >= T_k]
    std::vector<double> term_ci;            // 95% half-widths
    std::vector<std::uint64_t> reached;     // paths with tau >= T_k
    double value = 0.0;                     // partial sum of terms
    double tail_bound_ratio = 0.0;          // fitted geometric ratio of |terms|
    std::uint64_t total_paths = 0;
    std::uint64_t capped_paths = 0;
};

// Series constant V(x): simulate the crossing chain, average u(H_k) over
// paths that reach the k-th crossing unabsorbed, sum over k. The terms list
// is truncated at the first k no path reaches.
inline VEstimate estimate_V(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                            const UProvider& u_provider, int k_max, std::uint64_t total_paths,
                            std::uint64_t seed, unsigned workers = 1,
                            std::uint64_t step_cap = default_step_cap) {
    require(k_max >= 0, Errc::bad_argument, "k_max must be nonnegative");
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");
    require(static_cast<bool>(u_provider), Errc::bad_argument, "estimate_V needs a u-provider");

    const std::size_t k_slots = static_cast<std::size_t>(k_max) + 1;
    struct Acc {
        std::vector<double> sum, sumsq;
        std::vector<std::uint64_t> reached;
        std::uint64_t capped = 0;
        void merge(const Acc& o) {
            for (std::size_t k = 0; k < sum.size(); ++k) {
                sum[k] += o.sum[k];
                sumsq[k] += o.sumsq[k];
                reached[k] += o.reached[k];
            }
            capped += o.capped;
        }
    };
    Acc init;
    init.sum.assign(k_slots, 0.0);
    init.sumsq.assign(k_slots, 0.0);
    init.reached.assign(k_slots, 0);

    Acc acc = parallel_accumulate(total_paths, workers, init, [&](Acc& a, std::uint64_t r) {
        std::vector<double> heights;
        detail::ChainObserver obs{&heights, static_cast<std::uint32_t>(k_max)};
        PathEnd end = run_path(x, law, mech, step_cap, RandomStream::for_replicate(seed, r), obs);
        if (!end.absorbed_at && !end.stopped_by_observer) ++a.capped;
        for (std::size_t k = 0; k < heights.size(); ++k) {
            std::optional<double> u = u_provider(heights[k]);
            if (!u)
                fail(Errc::provider_out_of_range,
                     "u-provider undefined at height " + std::to_string(heights[k]));
            a.sum[k] += *u;
            a.sumsq[k] += *u * *u;
            ++a.reached[k];
        }
    });
    detail::check_capped(acc.capped, total_paths, "crossing chain");

    // Truncate at the first crossing index no path reached.
    std::size_t used = k_slots;
    for (std::size_t k = 0; k < k_slots; ++k) {
        if (acc.reached[k] == 0) {
            used = k;
            break;
        }
    }

    VEstimate out;
    out.x = x;
    out.k_max = k_max;
    out.total_paths = total_paths;
    out.capped_paths = acc.capped;
    const double n = static_cast<double>(total_paths);
    for (std::size_t k = 0; k < used; ++k) {
        double mean = acc.sum[k] / n;
        out.terms.push_back(mean);
        out.reached.push_back(acc.reached[k]);
        double var = total_paths > 1 ? std::max(0.0, (acc.sumsq[k] - acc.sum[k] * mean) / (n - 1.0)) : 0.0;
        out.term_ci.push_back(z_95 * std::sqrt(var / n));
        out.value += mean;
    }

    // Geometric tail ratio of |terms|: unweighted log-linear fit over the
    // nonzero terms. Ratio >= 1 flags a non-decaying (divergent) series.
    std::vector<double> ks, logs, ones;
    for (std::size_t k = 0; k < out.terms.size(); ++k) {
        if (std::abs(out.terms[k]) <= 0.0) continue;
        ks.push_back(static_cast<double>(k));
        logs.push_back(std::log(std::abs(out.terms[k])));
        ones.push_back(1.0);
    }
    if (ks.size() >= 2 && ks.front() < ks.back())
        out.tail_bound_ratio = std::exp(weighted_line_fit(ks, logs, ones).slope);
    return out;
}

struct RhoEstimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::uint64_t survivors = 0;
    std::uint64_t nonneg = 0;
    std::uint64_t total_paths = 0;
};

inline constexpr std::uint64_t rho_min_survivors = 100;

// Fraction of surviving paths ending on the nonnegative side at time n: the
// estimate of the mixture weight rho.
inline RhoEstimate estimate_rho(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                std::uint64_t n, std::uint64_t total_paths, std::uint64_t seed,
                                unsigned workers = 1) {
    require(n >= 1, Errc::bad_argument, "horizon must be at least 1");
    require(total_paths >= 1, Errc::bad_argument, "need at least one path");

    struct Acc {
        std::uint64_t survivors = 0, nonneg = 0;
        void merge(const Acc& o) {
            survivors += o.survivors;
            nonneg += o.nonneg;
        }
    };
    Acc acc = parallel_accumulate(total_paths, workers, Acc{}, [&](Acc& a, std::uint64_t r) {
        NullObserver obs;
        PathEnd end = run_path(x, law, mech, n, RandomStream::for_replicate(seed, r), obs);
        if (end.absorbed_at) return;
        ++a.survivors;
        if (end.position >= 0.0) ++a.nonneg;
    });

    require(acc.survivors >= rho_min_survivors, Errc::too_few_survivors,
            "need at least " + std::to_string(rho_min_survivors) + " surviving paths, got " +
                std::to_string(acc.survivors));

    RhoEstimate out;
    IntervalEstimate w = wilson_interval(acc.nonneg, acc.survivors);
    out.value = w.estimate;
    out.lo = w.lo;
    out.hi = w.hi;
    out.survivors = acc.survivors;
    out.nonneg = acc.nonneg;
    out.total_paths = total_paths;
    return out;
}

}  // namespace walklab
