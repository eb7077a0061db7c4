#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "walklab/mechanism.hpp"

using namespace walklab;

namespace {

Errc code_of(const MechanismSpec& spec) {
    try {
        build_mechanism(spec);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected the spec to be rejected");
    return Errc::invalid_spec;
}

}  // namespace

TEST_CASE("time-below-zero kills once the age reaches the budget, below zero only") {
    SegmentMechanism mech = build_mechanism(deterministic_tbz_spec(2));
    RandomStream rs = RandomStream::for_replicate(1, 0);
    SegmentState seg;
    mech.new_segment(seg, rs, false);
    REQUIRE_FALSE(mech.absorbed(seg, 0, -1.0));
    REQUIRE_FALSE(mech.absorbed(seg, 1, -1.0));
    REQUIRE(mech.absorbed(seg, 2, -1.0));
    REQUIRE(mech.absorbed(seg, 5, -1.0));
    REQUIRE_FALSE(mech.absorbed(seg, 2, 3.0));  // nonnegative side is safe
    REQUIRE_FALSE(mech.absorbed(seg, 2, 0.0));
}

TEST_CASE("interval-gate kills only at segment age zero, outside the interval") {
    SegmentMechanism mech = build_mechanism(gate_spec(-1.0, 1.0));
    RandomStream rs = RandomStream::for_replicate(2, 0);
    SegmentState seg;
    mech.new_segment(seg, rs, false);
    REQUIRE(mech.absorbed(seg, 0, 2.0));
    REQUIRE_FALSE(mech.absorbed(seg, 1, 2.0));
    REQUIRE_FALSE(mech.absorbed(seg, 0, 0.5));
    REQUIRE(mech.absorbed(seg, 0, 1.0));  // open interval
    REQUIRE(mech.absorbed(seg, 0, -1.0));

    SegmentMechanism exempt = build_mechanism(gate_spec(-1.0, 1.0, true));
    SegmentState first, later;
    exempt.new_segment(first, rs, true);
    exempt.new_segment(later, rs, false);
    REQUIRE_FALSE(exempt.absorbed(first, 0, 2.0));
    REQUIRE(exempt.absorbed(later, 0, 2.0));
}

TEST_CASE("avoid-sets kills on the chosen half-open set at every age") {
    SegmentMechanism mech = build_mechanism(avoid_spec({1.0}, {{{-2.0, -1.0}}}));
    RandomStream rs = RandomStream::for_replicate(3, 0);
    SegmentState seg;
    mech.new_segment(seg, rs, false);
    REQUIRE(seg.u_value == 0);
    REQUIRE(mech.absorbed(seg, 0, -1.5));
    REQUIRE(mech.absorbed(seg, 7, -1.5));
    REQUIRE(mech.absorbed(seg, 0, -2.0));       // closed at the left end
    REQUIRE_FALSE(mech.absorbed(seg, 0, -1.0));  // open at the right end
    REQUIRE_FALSE(mech.absorbed(seg, 0, 0.5));
    REQUIRE_FALSE(mech.absorbed(seg, 0, -3.0));
}

TEST_CASE("avoid-sets samples the set choice from the pmf") {
    SegmentMechanism mech =
        build_mechanism(avoid_spec({0.25, 0.75}, {{{-1.0, -0.5}}, {{-3.0, -2.0}}}));
    RandomStream rs = RandomStream::for_replicate(4, 0);
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        SegmentState seg;
        mech.new_segment(seg, rs, false);
        REQUIRE(seg.u_value <= 1);
        hits += seg.u_value == 1;
    }
    REQUIRE(std::abs(hits / double(n) - 0.75) < 4.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST_CASE("position-hazard kill frequency matches the piecewise rate") {
    SegmentMechanism mech = build_mechanism(hazard_spec({-2.0}, {0.7, 0.3}));
    RandomStream rs = RandomStream::for_replicate(5, 0);
    const int n = 100000;
    int near = 0, far = 0, nonneg = 0;
    for (int i = 0; i < n; ++i) {
        SegmentState seg;
        mech.new_segment(seg, rs, false);
        near += mech.absorbed(seg, 3, -0.5);  // [-2, 0): p = 0.3
        far += mech.absorbed(seg, 4, -5.0);   // (-inf, -2): p = 0.7
        nonneg += mech.absorbed(seg, 3, 1.0);
    }
    REQUIRE(nonneg == 0);
    REQUIRE(std::abs(near / double(n) - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / n));
    REQUIRE(std::abs(far / double(n) - 0.7) < 4.0 * std::sqrt(0.3 * 0.7 / n));

    // idempotent per (segment, age) and independent across ages
    SegmentState seg;
    mech.new_segment(seg, rs, false);
    for (std::uint64_t age = 0; age < 50; ++age)
        REQUIRE(mech.absorbed(seg, age, -0.5) == mech.absorbed(seg, age, -0.5));
}

TEST_CASE("geometric budgets are memoryless with mean 1/q") {
    const double q = 0.3;
    SegmentMechanism mech = build_mechanism(geometric_tbz_spec(q));
    RandomStream rs = RandomStream::for_replicate(6, 0);
    const int n = 200000;
    double sum = 0.0;
    int at_one = 0;
    for (int i = 0; i < n; ++i) {
        SegmentState seg;
        mech.new_segment(seg, rs, false);
        std::uint64_t u = 1;
        while (!mech.absorbed(seg, u, -1.0)) ++u;  // first killing age = budget
        sum += double(u);
        at_one += u == 1;
    }
    double se_mean = std::sqrt((1.0 - q) / (q * q) / n);
    REQUIRE(std::abs(sum / n - 1.0 / q) < 4.0 * se_mean);
    REQUIRE(std::abs(at_one / double(n) - q) < 4.0 * std::sqrt(q * (1.0 - q) / n));
}

TEST_CASE("budget tails and closed-form u values") {
    SegmentMechanism geo = build_mechanism(geometric_tbz_spec(0.3));
    REQUIRE(geo.u_tail(0) == 1.0);
    REQUIRE(geo.u_tail(2) == Catch::Approx(0.49));

    SegmentMechanism det = build_mechanism(deterministic_tbz_spec(2));
    REQUIRE(det.u_tail(1) == 1.0);
    REQUIRE(det.u_tail(2) == 0.0);

    SegmentMechanism tab = build_mechanism(tabulated_tbz_spec({{1, 0.25}, {3, 0.25}}, 0.5));
    REQUIRE(tab.u_tail(0) == 1.0);
    REQUIRE(tab.u_tail(1) == Catch::Approx(0.75));
    REQUIRE(tab.u_tail(2) == Catch::Approx(0.75));
    REQUIRE(tab.u_tail(3) == Catch::Approx(0.5));
    REQUIRE(tab.u_mass_at_infinity() == 0.5);

    auto c = [](double) { return 0.8; };
    REQUIRE(tab.analytic_u(-1.0, c) == Catch::Approx(0.4));  // only U = infinity survives below
    REQUIRE(tab.analytic_u(2.0, c) == Catch::Approx(0.8));
    SegmentMechanism gate = build_mechanism(gate_spec(-1.0, 1.0));
    REQUIRE(gate.analytic_u(2.0, c) == 0.0);
    REQUIRE(gate.analytic_u(0.5, c) == Catch::Approx(0.8));
    REQUIRE_FALSE(gate.analytic_u(-0.5, c).has_value());
}

TEST_CASE("sure kills at a segment start are recognized") {
    REQUIRE(build_mechanism(immediate_kill_spec()).always_kills_at_start(-0.5, false));
    REQUIRE_FALSE(build_mechanism(immediate_kill_spec()).always_kills_at_start(0.5, false));
    REQUIRE(build_mechanism(gate_spec(-1.0, 1.0)).always_kills_at_start(2.0, false));
    REQUIRE_FALSE(build_mechanism(gate_spec(-1.0, 1.0, true)).always_kills_at_start(2.0, true));
    REQUIRE(build_mechanism(avoid_spec({1.0}, {{{-2.0, -1.0}}})).always_kills_at_start(-1.5, false));
    REQUIRE_FALSE(build_mechanism(geometric_tbz_spec(0.5)).always_kills_at_start(-1.5, false));
}

TEST_CASE("malformed mechanism specs are rejected as invalid") {
    REQUIRE(code_of(hazard_spec({}, {1.5})) == Errc::invalid_spec);
    REQUIRE(code_of(hazard_spec({}, {-0.1})) == Errc::invalid_spec);
    REQUIRE(code_of(hazard_spec({}, {0.0})) == Errc::invalid_spec);        // no positive floor
    REQUIRE(code_of(hazard_spec({-1.0, -2.0}, {0.5, 0.5, 0.5})) == Errc::invalid_spec);
    REQUIRE(code_of(hazard_spec({2.0}, {0.5, 0.5})) == Errc::invalid_spec);
    REQUIRE(code_of(avoid_spec({1.0}, {{{-1.5, -1.5}}})) == Errc::invalid_spec);  // empty interior
    REQUIRE(code_of(avoid_spec({1.0}, {{{-1.0, 0.5}}})) == Errc::invalid_spec);   // above zero
    REQUIRE(code_of(avoid_spec({0.5, 0.4}, {{{-1.0, -0.5}}, {{-1.0, -0.5}}})) == Errc::invalid_spec);
    REQUIRE(code_of(geometric_tbz_spec(0.0)) == Errc::invalid_spec);
    REQUIRE(code_of(geometric_tbz_spec(1.1)) == Errc::invalid_spec);
    REQUIRE(code_of(deterministic_tbz_spec(0)) == Errc::invalid_spec);
    REQUIRE(code_of(tabulated_tbz_spec({{1, 0.0}}, 1.0)) == Errc::invalid_spec);  // all mass at infinity
    REQUIRE(code_of(tabulated_tbz_spec({{0, 1.0}}, 0.0)) == Errc::invalid_spec);  // support below 1
    REQUIRE(code_of(tabulated_tbz_spec({{1, 0.5}, {1, 0.5}}, 0.0)) == Errc::invalid_spec);
    REQUIRE(code_of(gate_spec(1.0, 2.0)) == Errc::invalid_spec);  // must straddle zero
    MechanismSpec floor_violation = hazard_spec({-4.0}, {0.5, 0.2});
    floor_violation.hazard_liminf = {{2.0, 0.6}};
    REQUIRE(code_of(floor_violation) == Errc::invalid_spec);

    // geometric budgets at q = 1 are legal: kill at the first below-zero age
    SegmentMechanism sure = build_mechanism(geometric_tbz_spec(1.0));
    RandomStream rs = RandomStream::for_replicate(7, 0);
    SegmentState seg;
    sure.new_segment(seg, rs, false);
    REQUIRE_FALSE(sure.absorbed(seg, 0, -1.0));
    REQUIRE(sure.absorbed(seg, 1, -1.0));
}
