#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "walklab/common.hpp"

namespace walklab {

inline constexpr double z_95 = 1.959963984540054;  // two-sided 95% normal quantile

struct IntervalEstimate {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval for a binomial proportion.
inline IntervalEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = z_95) {
    require(trials > 0, Errc::bad_argument, "wilson interval needs at least one trial");
    require(successes <= trials, Errc::bad_argument, "successes exceed trials");
    double n = static_cast<double>(trials);
    double p = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {p, center - half, center + half};
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r2 = 0.0;
};

// Weighted least squares of y on x. Weights are treated as absolute inverse
// variances, so slope_stderr = sqrt(1 / sum w (x - xbar)^2). A degenerate
// response (all residual and total variation below tolerance) counts as a
// perfect fit.
inline LineFit weighted_line_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                                 const std::vector<double>& ws) {
    require(xs.size() == ys.size() && xs.size() == ws.size(), Errc::bad_argument,
            "line fit needs matching xs/ys/weights");
    require(xs.size() >= 2, Errc::bad_argument, "line fit needs at least two points");

    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        require(ws[i] > 0.0 && std::isfinite(ws[i]), Errc::bad_argument, "weights must be positive and finite");
        sw += ws[i];
        swx += ws[i] * xs[i];
        swy += ws[i] * ys[i];
    }
    double xbar = swx / sw, ybar = swy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += ws[i] * (xs[i] - xbar) * (xs[i] - xbar);
        sxy += ws[i] * (xs[i] - xbar) * (ys[i] - ybar);
    }
    require(sxx > 0.0, Errc::bad_argument, "line fit needs at least two distinct x values");

    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    fit.slope_stderr = std::sqrt(1.0 / sxx);

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += ws[i] * resid * resid;
        ss_tot += ws[i] * (ys[i] - ybar) * (ys[i] - ybar);
    }
    if (ss_tot <= 1e-300) {
        fit.r2 = ss_res <= 1e-300 ? 1.0 : 0.0;
    } else {
        fit.r2 = 1.0 - ss_res / ss_tot;
    }
    return fit;
}

// Delta-method variance of log p-hat for a binomial proportion; the inverse
// is the fit weight. total = 0 marks an exact (oracle) curve: unit effective
// sample size, which only fixes the relative weighting.
inline double log_estimate_weight(double p, std::uint64_t total) {
    double n = total == 0 ? 1.0 : static_cast<double>(total);
    double q = 1.0 - p;
    double q_floor = total == 0 ? 1e-12 : 0.5 / n;
    if (q < q_floor) q = q_floor;
    return p * n / q;
}

// Streaming mean/variance (Welford) with deterministic block merge.
struct RunningStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++n;
        double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }

    void merge(const RunningStats& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        double d = o.mean - mean;
        std::uint64_t total = n + o.n;
        mean += d * static_cast<double>(o.n) / static_cast<double>(total);
        m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / static_cast<double>(total);
        n = total;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

}  // namespace walklab
