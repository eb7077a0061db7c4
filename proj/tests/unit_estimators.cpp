#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "walklab/estimators.hpp"
#include "walklab/lattice_oracle.hpp"

using namespace walklab;

namespace {
const double root_2_over_pi = std::sqrt(2.0 / 3.14159265358979324);
}

TEST_CASE("geometric horizon grids are sorted, deduplicated and anchored") {
    REQUIRE(geometric_horizons(1024, 64) ==
            std::vector<std::uint64_t>{64, 91, 128, 181, 256, 362, 512, 724, 1024});
    REQUIRE(geometric_horizons(64, 64) == std::vector<std::uint64_t>{64});
    REQUIRE(geometric_horizons(100, 64).back() == 100);
}

TEST_CASE("never-absorb survival is exactly one at every horizon") {
    SurvivalCurve c = estimate_survival(0.0, IncrementLaw::rademacher(), build_mechanism(never_spec()),
                                        {16, 64, 256}, 5000, 1);
    for (std::size_t i = 0; i < c.horizons.size(); ++i) {
        REQUIRE(c.survivors[i] == 5000);
        REQUIRE(c.estimates[i] == 1.0);
        REQUIRE(c.ci_high[i] <= 1.0 + 1e-15);
    }
}

TEST_CASE("monte carlo survival agrees with the exact oracle") {
    IncrementLaw law = IncrementLaw::rademacher();
    SegmentMechanism mech = build_mechanism(geometric_tbz_spec(0.3));
    std::vector<std::uint64_t> horizons = {16, 64, 256};
    const std::uint64_t paths = 40000;
    SurvivalCurve mc = estimate_survival(0.0, law, mech, horizons, paths, 2024);
    std::vector<double> dp = oracle::dp_survival(0.0, law, mech, horizons);
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        double se = std::sqrt(dp[i] * (1.0 - dp[i]) / double(paths));
        REQUIRE(std::abs(mc.estimates[i] - dp[i]) <= 4.0 * se);
        REQUIRE(mc.ci_low[i] <= mc.estimates[i]);
        REQUIRE(mc.estimates[i] <= mc.ci_high[i]);
    }
}

TEST_CASE("survivor counts do not depend on the worker count") {
    IncrementLaw law = IncrementLaw::rademacher();
    SegmentMechanism mech = build_mechanism(geometric_tbz_spec(0.3));
    SurvivalCurve a = estimate_survival(0.0, law, mech, {64, 256}, 30000, 7, 1);
    SurvivalCurve b = estimate_survival(0.0, law, mech, {64, 256}, 30000, 7, 3);
    REQUIRE(a.survivors == b.survivors);
    REQUIRE(a.estimates == b.estimates);
}

TEST_CASE("the exponent fit recovers a pure power law exactly") {
    SurvivalCurve c;
    c.x = 0.0;
    c.total_paths = 0;  // exact inputs
    for (std::uint64_t n : geometric_horizons(4096, 64)) {
        c.horizons.push_back(n);
        double p = 2.0 / std::sqrt(double(n));
        c.estimates.push_back(p);
        c.survivors.push_back(0);
        c.ci_low.push_back(p);
        c.ci_high.push_back(p);
    }
    ExponentFit fit = fit_exponent(c);
    REQUIRE(fit.slope == Catch::Approx(-0.5).margin(1e-12));
    REQUIRE(std::exp(fit.intercept) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(fit.r2 == Catch::Approx(1.0).margin(1e-12));

    c.estimates[3] = 0.0;
    try {
        fit_exponent(c);
        FAIL("a zero estimate cannot enter the log fit");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::zero_survival);
    }
}

TEST_CASE("the crossing constant is exact when the overshoot is forced") {
    // the coin walk always enters the negative side at -1
    CEstimate c0 = estimate_c(0.0, IncrementLaw::rademacher(), 2000, 3);
    REQUIRE(c0.overshoot_mean == -1.0);
    REQUIRE(c0.overshoot_stderr == 0.0);
    REQUIRE(c0.value == Catch::Approx(root_2_over_pi).margin(1e-12));
    REQUIRE(c0.value_stderr == 0.0);
    REQUIRE(c0.used_paths + c0.capped_paths == 2000);

    CEstimate c3 = estimate_c(3.0, IncrementLaw::rademacher(), 2000, 3);
    REQUIRE(c3.value == Catch::Approx(4.0 * root_2_over_pi).margin(1e-12));
}

TEST_CASE("the crossing constant tracks the start point for gaussian steps") {
    CEstimate c = estimate_c(0.0, IncrementLaw::gaussian(1.0), 50000, 4);
    // |x - overshoot| = E|overshoot|, which is between 0 and 1 step
    REQUIRE(c.value > 0.0);
    REQUIRE(c.value < 2.0 * root_2_over_pi);
    REQUIRE(c.overshoot_mean < 0.0);
    REQUIRE(c.value_stderr > 0.0);
    REQUIRE(std::abs(c.value - std::sqrt(2.0) * std::abs(c.overshoot_mean) /
                                   std::sqrt(3.14159265358979324)) < 1e-12);
}

TEST_CASE("u estimates match their closed forms and the oracle") {
    IncrementLaw law = IncrementLaw::rademacher();

    // a sure kill below zero pins u(-1) = 0 with no sampling noise
    UEstimate dead = estimate_u(-1.0, law, build_mechanism(immediate_kill_spec()), 4096, 1000, 5);
    REQUIRE(dead.value == 0.0);
    REQUIRE(dead.lo == 0.0);
    REQUIRE(dead.hi == 0.0);

    UEstimate u0 = estimate_u(0.0, law, build_mechanism(immediate_kill_spec()), 4096, 300000, 5);
    REQUIRE(u0.lo <= root_2_over_pi * 1.05);
    REQUIRE(u0.hi >= root_2_over_pi * 0.95);
    REQUIRE(std::abs(u0.value - root_2_over_pi) < 0.05 * root_2_over_pi);

    // mass at infinity: only never-expiring budgets survive below zero
    SegmentMechanism half = build_mechanism(tabulated_tbz_spec({{1, 0.5}}, 0.5));
    UEstimate um = estimate_u(-1.0, law, half, 4096, 300000, 5);
    REQUIRE(um.lo <= 0.5 * root_2_over_pi * 1.08);
    REQUIRE(um.hi >= 0.5 * root_2_over_pi * 0.92);

    // the analytic route short-circuits sampling entirely
    UEstimate closed = estimate_u(-1.0, law, half, 4096, 10, 5, 1,
                                  [](double) { return root_2_over_pi; });
    REQUIRE(closed.analytic);
    REQUIRE(closed.value == Catch::Approx(0.5 * root_2_over_pi).margin(1e-12));
    REQUIRE(closed.lo == closed.value);
    REQUIRE(closed.hi == closed.value);
}

TEST_CASE("the crossing series truncates at the absorption wall") {
    UProvider u = [](double y) -> std::optional<double> {
        return y >= 0.0 ? std::optional<double>(root_2_over_pi) : std::optional<double>(0.0);
    };
    VEstimate v = estimate_V(0.0, IncrementLaw::rademacher(), build_mechanism(immediate_kill_spec()), u,
                             3, 20000, 6);
    REQUIRE(v.terms.size() == 2);  // no path survives its first down-crossing
    REQUIRE(v.terms[0] == Catch::Approx(root_2_over_pi).margin(1e-12));
    // the k=0 weight is the same for every path; the interval is pure
    // cancellation noise from the sum-of-squares variance
    REQUIRE(v.term_ci[0] < 1e-6);
    REQUIRE(v.terms[1] == 0.0);
    REQUIRE(v.value == Catch::Approx(root_2_over_pi).margin(1e-12));
}

TEST_CASE("a free walk with unit weights counts its crossings") {
    UProvider ones = [](double) -> std::optional<double> { return 1.0; };
    VEstimate v = estimate_V(0.0, IncrementLaw::rademacher(), build_mechanism(never_spec()), ones, 5,
                             200, 8, 1, 100000000);
    REQUIRE(v.terms.size() == 6);
    for (double t : v.terms) REQUIRE(t == 1.0);
    for (double ci : v.term_ci) REQUIRE(ci == 0.0);
    REQUIRE(v.value == 6.0);
    REQUIRE(v.tail_bound_ratio == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("an undefined u height is a provider error") {
    UProvider partial = [](double y) -> std::optional<double> {
        if (y < -0.5) return std::nullopt;
        return 1.0;
    };
    try {
        estimate_V(0.0, IncrementLaw::rademacher(), build_mechanism(never_spec()), partial, 2, 50, 8);
        FAIL("the provider cannot cover height -1");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::provider_out_of_range);
    }
}

TEST_CASE("rho is exactly one when the negative side is lethal") {
    RhoEstimate r = estimate_rho(0.0, IncrementLaw::rademacher(), build_mechanism(immediate_kill_spec()),
                                 1024, 100000, 9);
    REQUIRE(r.value == 1.0);
    REQUIRE(r.nonneg == r.survivors);
    REQUIRE(r.survivors >= rho_min_survivors);

    try {
        estimate_rho(0.0, IncrementLaw::rademacher(), build_mechanism(immediate_kill_spec()), 4096, 2000, 9);
        FAIL("2000 paths cannot meet the survivor floor at this horizon");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::too_few_survivors);
    }
}
