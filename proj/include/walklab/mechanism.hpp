#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/rng.hpp"

namespace walklab {

// Per-segment absorption. When the walk starts a new excursion on one side of
// zero, the mechanism draws fresh randomness for that segment; absorbed(seg,
// i, x) then decides, for segment age i = 0, 1, ... and current position x,
// whether the walk is killed at that instant. Age 0 is the crossing step
// itself, and the evaluation also happens at time 0 for the initial segment.

enum class MechanismFamily {
    never_absorb,
    time_below_zero,
    position_hazard,
    avoid_sets,
    interval_gate,
};

inline const char* family_name(MechanismFamily f) {
    switch (f) {
        case MechanismFamily::never_absorb: return "never-absorb";
        case MechanismFamily::time_below_zero: return "time-below-zero";
        case MechanismFamily::position_hazard: return "position-hazard";
        case MechanismFamily::avoid_sets: return "avoid-sets";
        case MechanismFamily::interval_gate: return "interval-gate";
    }
    return "unknown";
}

// Law of the per-segment budget U on {1,2,...} with an optional atom at
// infinity, used by the time-below-zero family.
struct ULawSpec {
    enum class Kind { geometric, deterministic, tabulated };
    Kind kind = Kind::geometric;
    double q = 0.5;                                          // geometric, q in (0,1]
    std::uint64_t m = 1;                                     // deterministic
    std::vector<std::pair<std::uint64_t, double>> pmf;       // tabulated finite part
    double p_inf = 0.0;                                      // mass at infinity
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct MechanismSpec {
    MechanismFamily family = MechanismFamily::never_absorb;

    ULawSpec u;  // time-below-zero

    // position-hazard: piecewise-constant p on (-inf, 0). values[0] applies on
    // (-inf, breaks[0]), values[i] on [breaks[i-1], breaks[i]), and the last
    // value on [breaks.back(), 0). p(x) = 0 for x >= 0 is not configurable.
    std::vector<double> hazard_breaks;
    std::vector<double> hazard_values;
    std::optional<std::pair<double, double>> hazard_liminf;  // declared (L, p_min)

    // avoid-sets: B_u for u = 0..M as unions of half-open intervals [lo, hi).
    std::vector<double> avoid_pmf;
    std::vector<std::vector<Interval>> avoid_sets;

    // interval-gate: open interval around zero checked whenever a segment
    // opens (including time 0 unless exempted).
    Interval gate{-1.0, 1.0};
    bool exempt_initial_segment = false;
};

constexpr std::uint64_t u_infinity = std::numeric_limits<std::uint64_t>::max();

struct SegmentState {
    std::uint64_t u_value = 0;         // time-below-zero budget / avoid-sets choice
    RandomStream hazard_stream{0};     // position-hazard per-step uniforms
    bool initial = false;              // segment k = 0
};

namespace detail {

inline bool in_half_open(const std::vector<Interval>& set, double x) {
    for (const Interval& iv : set)
        if (iv.lo <= x && x < iv.hi) return true;
    return false;
}

}  // namespace detail

class SegmentMechanism {
  public:
    explicit SegmentMechanism(MechanismSpec spec) : spec_(std::move(spec)) { validate(); }

    const MechanismSpec& spec() const { return spec_; }
    MechanismFamily family() const { return spec_.family; }

    // Draws the randomness for a fresh segment. Consumes a deterministic
    // number of values from the path stream (possibly zero).
    void new_segment(SegmentState& seg, RandomStream& path_stream, bool initial) const {
        seg.initial = initial;
        switch (spec_.family) {
            case MechanismFamily::never_absorb:
            case MechanismFamily::interval_gate:
                break;
            case MechanismFamily::time_below_zero:
                seg.u_value = sample_u(path_stream);
                break;
            case MechanismFamily::position_hazard:
                seg.hazard_stream = path_stream.derive();
                break;
            case MechanismFamily::avoid_sets: {
                double u = path_stream.next_u01();
                double acc = 0.0;
                seg.u_value = spec_.avoid_pmf.size() - 1;
                for (std::size_t i = 0; i + 1 < spec_.avoid_pmf.size(); ++i) {
                    acc += spec_.avoid_pmf[i];
                    if (u < acc) {
                        seg.u_value = i;
                        break;
                    }
                }
                break;
            }
        }
    }

    // Kill decision at segment age i and position x. Idempotent per (segment,
    // i): the hazard family addresses its uniforms by absolute age.
    bool absorbed(const SegmentState& seg, std::uint64_t i, double x) const {
        switch (spec_.family) {
            case MechanismFamily::never_absorb:
                return false;
            case MechanismFamily::time_below_zero:
                return x < 0.0 && seg.u_value != u_infinity && i >= seg.u_value;
            case MechanismFamily::position_hazard: {
                if (x >= 0.0) return false;
                double p = hazard_at(x);
                if (p <= 0.0) return false;
                if (p >= 1.0) return true;
                return RandomStream::to_u01(seg.hazard_stream.at(i)) < p;
            }
            case MechanismFamily::avoid_sets:
                return detail::in_half_open(spec_.avoid_sets[seg.u_value], x);
            case MechanismFamily::interval_gate:
                if (i != 0) return false;
                if (seg.initial && spec_.exempt_initial_segment) return false;
                return !(spec_.gate.lo < x && x < spec_.gate.hi);
        }
        return false;
    }

    // True when a segment opening at position y is killed at age 0 with
    // probability one, whatever the segment randomness.
    bool always_kills_at_start(double y, bool initial) const {
        switch (spec_.family) {
            case MechanismFamily::never_absorb:
            case MechanismFamily::time_below_zero:
                return false;
            case MechanismFamily::position_hazard:
                return y < 0.0 && hazard_at(y) >= 1.0;
            case MechanismFamily::avoid_sets: {
                if (y >= 0.0) return false;
                for (std::size_t u = 0; u < spec_.avoid_pmf.size(); ++u)
                    if (spec_.avoid_pmf[u] > 0.0 && !detail::in_half_open(spec_.avoid_sets[u], y)) return false;
                return true;
            }
            case MechanismFamily::interval_gate:
                if (initial && spec_.exempt_initial_segment) return false;
                return !(spec_.gate.lo < y && y < spec_.gate.hi);
        }
        return false;
    }

    // Hazard p(x); zero for x >= 0 by construction.
    double hazard_at(double x) const {
        if (x >= 0.0) return 0.0;
        std::size_t i = std::upper_bound(spec_.hazard_breaks.begin(), spec_.hazard_breaks.end(), x) -
                        spec_.hazard_breaks.begin();
        return spec_.hazard_values[i];
    }

    // P(U > i) for the time-below-zero family.
    double u_tail(std::uint64_t i) const {
        switch (spec_.u.kind) {
            case ULawSpec::Kind::geometric:
                return std::pow(1.0 - spec_.u.q, static_cast<double>(i));
            case ULawSpec::Kind::deterministic:
                return i < spec_.u.m ? 1.0 : 0.0;
            case ULawSpec::Kind::tabulated: {
                double tail = spec_.u.p_inf;
                for (const auto& [k, p] : spec_.u.pmf)
                    if (k > i) tail += p;
                return tail;
            }
        }
        return 0.0;
    }

    double u_mass_at_infinity() const {
        switch (spec_.u.kind) {
            case ULawSpec::Kind::geometric:
            case ULawSpec::Kind::deterministic:
                return 0.0;
            case ULawSpec::Kind::tabulated:
                return spec_.u.p_inf;
        }
        return 0.0;
    }

    // Largest finite support point of U (0 when all mass is at infinity).
    std::uint64_t u_max_finite() const {
        switch (spec_.u.kind) {
            case ULawSpec::Kind::geometric:
                return 0;  // unbounded; callers must special-case geometric
            case ULawSpec::Kind::deterministic:
                return spec_.u.m;
            case ULawSpec::Kind::tabulated:
                return spec_.u.pmf.empty() ? 0 : spec_.u.pmf.back().first;
        }
        return 0;
    }

    // Closed-form u(y) when the family admits one: time-below-zero on both
    // sides, the others on the nonnegative side. c_provider(y) must supply
    // the no-absorption persistence constant c_y.
    std::optional<double> analytic_u(double y, const std::function<double(double)>& c_provider) const {
        switch (spec_.family) {
            case MechanismFamily::never_absorb:
                return c_provider(y);
            case MechanismFamily::time_below_zero:
                return y >= 0.0 ? c_provider(y) : c_provider(y) * u_mass_at_infinity();
            case MechanismFamily::position_hazard:
            case MechanismFamily::avoid_sets:
                if (y >= 0.0) return c_provider(y);
                return std::nullopt;
            case MechanismFamily::interval_gate: {
                if (y < 0.0) return std::nullopt;
                if (spec_.exempt_initial_segment || (spec_.gate.lo < y && y < spec_.gate.hi))
                    return c_provider(y);
                return 0.0;
            }
        }
        return std::nullopt;
    }

  private:
    std::uint64_t sample_u(RandomStream& rs) const {
        switch (spec_.u.kind) {
            case ULawSpec::Kind::geometric: {
                double u = rs.next_u01();
                double r = std::log1p(-u) / std::log1p(-spec_.u.q);  // 0/-inf -> 0 when q = 1
                return 1 + static_cast<std::uint64_t>(r);
            }
            case ULawSpec::Kind::deterministic:
                return spec_.u.m;
            case ULawSpec::Kind::tabulated: {
                double u = rs.next_u01();
                if (u < spec_.u.p_inf) return u_infinity;  // atom at infinity first
                double acc = spec_.u.p_inf;
                for (const auto& [k, p] : spec_.u.pmf) {
                    acc += p;
                    if (u < acc) return k;
                }
                return spec_.u.pmf.empty() ? u_infinity : spec_.u.pmf.back().first;
            }
        }
        return u_infinity;
    }

    void validate() const {
        switch (spec_.family) {
            case MechanismFamily::never_absorb:
                break;
            case MechanismFamily::time_below_zero:
                validate_u();
                break;
            case MechanismFamily::position_hazard:
                validate_hazard();
                break;
            case MechanismFamily::avoid_sets:
                validate_avoid();
                break;
            case MechanismFamily::interval_gate:
                require(spec_.gate.lo < 0.0 && 0.0 < spec_.gate.hi, Errc::invalid_spec,
                        "interval-gate interval must be open and contain zero");
                break;
        }
    }

    void validate_u() const {
        const ULawSpec& u = spec_.u;
        switch (u.kind) {
            case ULawSpec::Kind::geometric:
                require(u.q > 0.0 && u.q <= 1.0, Errc::invalid_spec, "geometric parameter must lie in (0, 1]");
                break;
            case ULawSpec::Kind::deterministic:
                require(u.m >= 1, Errc::invalid_spec, "deterministic budget must be at least 1");
                break;
            case ULawSpec::Kind::tabulated: {
                require(u.p_inf >= 0.0 && u.p_inf < 1.0, Errc::invalid_spec,
                        "mass at infinity must lie in [0, 1)");
                require(!u.pmf.empty(), Errc::invalid_spec, "tabulated budget law needs finite support");
                double total = u.p_inf;
                std::uint64_t prev = 0;
                for (const auto& [k, p] : u.pmf) {
                    require(k >= 1, Errc::invalid_spec, "budget support must lie in {1, 2, ...}");
                    require(k > prev, Errc::invalid_spec, "budget support must be strictly increasing");
                    require(p >= 0.0, Errc::invalid_spec, "budget probabilities must be nonnegative");
                    prev = k;
                    total += p;
                }
                require(std::abs(total - 1.0) <= 1e-12, Errc::invalid_spec,
                        "budget probabilities must sum to 1");
                break;
            }
        }
    }

    void validate_hazard() const {
        require(spec_.hazard_values.size() == spec_.hazard_breaks.size() + 1, Errc::invalid_spec,
                "hazard needs one more value than breakpoints");
        for (std::size_t i = 0; i < spec_.hazard_breaks.size(); ++i) {
            require(spec_.hazard_breaks[i] < 0.0, Errc::invalid_spec, "hazard breakpoints must be negative");
            if (i) {
                require(spec_.hazard_breaks[i - 1] < spec_.hazard_breaks[i], Errc::invalid_spec,
                        "hazard breakpoints must be strictly increasing");
            }
        }
        for (double v : spec_.hazard_values)
            require(v >= 0.0 && v <= 1.0, Errc::invalid_spec, "hazard values must lie in [0, 1]");

        // Far-field condition: the hazard must stay bounded away from zero
        // towards -infinity. With finitely many pieces that is the value of
        // the unbounded piece; a declared (L, p_min) floor is checked against
        // every piece that overlaps (-inf, -L].
        if (spec_.hazard_liminf) {
            double L = spec_.hazard_liminf->first;
            double p_min = spec_.hazard_liminf->second;
            require(p_min > 0.0 && L > 0.0, Errc::invalid_spec,
                    "hazard floor needs L > 0 and p_min > 0");
            for (std::size_t i = 0; i < spec_.hazard_values.size(); ++i) {
                double piece_lo =
                    i == 0 ? -std::numeric_limits<double>::infinity() : spec_.hazard_breaks[i - 1];
                if (piece_lo <= -L) {
                    require(spec_.hazard_values[i] >= p_min, Errc::invalid_spec,
                            "hazard dips below the declared floor on (-inf, -L]");
                }
            }
        } else {
            require(spec_.hazard_values.front() > 0.0, Errc::invalid_spec,
                    "hazard must stay positive towards -infinity");
        }
    }

    void validate_avoid() const {
        require(!spec_.avoid_pmf.empty() && spec_.avoid_pmf.size() == spec_.avoid_sets.size(),
                Errc::invalid_spec, "avoid-sets needs matching choice pmf and set list");
        double total = 0.0;
        for (double p : spec_.avoid_pmf) {
            require(p >= 0.0, Errc::invalid_spec, "choice probabilities must be nonnegative");
            total += p;
        }
        require(std::abs(total - 1.0) <= 1e-12, Errc::invalid_spec, "choice probabilities must sum to 1");
        for (const auto& set : spec_.avoid_sets) {
            for (const Interval& iv : set) {
                require(std::isfinite(iv.lo) && std::isfinite(iv.hi), Errc::invalid_spec,
                        "avoided intervals must be bounded");
                require(iv.lo <= iv.hi, Errc::invalid_spec, "avoided interval endpoints out of order");
                require(iv.hi <= 0.0, Errc::invalid_spec, "avoided intervals must lie below zero");
            }
        }
        double b0_length = 0.0;
        for (const Interval& iv : spec_.avoid_sets[0]) b0_length += iv.hi - iv.lo;
        require(b0_length > 0.0, Errc::invalid_spec, "the u = 0 avoided set must have non-empty interior");
    }

    MechanismSpec spec_;
};

inline SegmentMechanism build_mechanism(const MechanismSpec& spec) { return SegmentMechanism(spec); }

}  // namespace walklab
