#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "walklab/increment_law.hpp"
#include "walklab/mechanism.hpp"
#include "walklab/rng.hpp"

namespace walklab {

enum class Side { nonneg, neg };

// Zero belongs to the nonnegative side.
inline Side side_of(double x) { return x >= 0.0 ? Side::nonneg : Side::neg; }

struct CrossingRecord {
    std::uint32_t k = 0;  // 0 is the start of the path
    std::uint64_t time = 0;
    double height = 0.0;
};

struct PathOutcome {
    std::optional<std::uint64_t> absorbed_at;
    std::uint64_t horizon = 0;
    std::vector<CrossingRecord> crossings;
    double final_position = 0.0;
    Side endpoint_side = Side::nonneg;
    std::vector<double> trajectory;  // S_0..S_end when requested
};

struct PathEnd {
    std::optional<std::uint64_t> absorbed_at;
    std::uint64_t steps = 0;  // last realized time index
    double position = 0.0;
    std::uint32_t crossings = 0;
    bool stopped_by_observer = false;
};

// Default observer: hooks are no-ops. on_crossing returning false stops the
// path right after the crossing is recorded (before the kill check at that
// instant), which is how "reached the k-th crossing unabsorbed" is counted.
struct NullObserver {
    bool on_crossing(std::uint32_t, std::uint64_t, double) { return true; }
    void on_position(std::uint64_t, double) {}
};

// Runs one path: position updates, segment bookkeeping, kill evaluation at
// every time index including 0. Per-step order: move, record a crossing if
// the side flipped (fresh segment randomness), then evaluate the kill.
template <class Obs>
PathEnd run_path(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                 std::uint64_t max_steps, RandomStream rs, Obs&& obs) {
    SegmentState seg;
    mech.new_segment(seg, rs, true);
    Side side = side_of(x);
    double pos = x;
    std::uint64_t age = 0;
    std::uint32_t k = 0;

    if (!obs.on_crossing(0, 0, pos)) return {std::nullopt, 0, pos, 0, true};
    obs.on_position(0, pos);
    if (mech.absorbed(seg, 0, pos)) return {0, 0, pos, 0, false};

    for (std::uint64_t t = 1; t <= max_steps; ++t) {
        pos += law.sample(rs);
        Side s = side_of(pos);
        if (s != side) {
            side = s;
            age = 0;
            ++k;
            mech.new_segment(seg, rs, false);
            if (!obs.on_crossing(k, t, pos)) return {std::nullopt, t, pos, k, true};
        } else {
            ++age;
        }
        obs.on_position(t, pos);
        if (mech.absorbed(seg, age, pos)) return {t, t, pos, k, false};
    }
    return {std::nullopt, max_steps, pos, k, false};
}

namespace detail {

struct RecordingObserver {
    std::vector<CrossingRecord>* crossings;
    std::vector<double>* trajectory;
    bool on_crossing(std::uint32_t k, std::uint64_t t, double h) {
        crossings->push_back({k, t, h});
        return true;
    }
    void on_position(std::uint64_t, double s) {
        if (trajectory) trajectory->push_back(s);
    }
};

}  // namespace detail

inline PathOutcome simulate_path(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                 std::uint64_t n, RandomStream rs, bool keep_trajectory = false) {
    PathOutcome out;
    out.horizon = n;
    detail::RecordingObserver obs{&out.crossings, keep_trajectory ? &out.trajectory : nullptr};
    PathEnd end = run_path(x, law, mech, n, rs, obs);
    out.absorbed_at = end.absorbed_at;
    out.final_position = end.position;
    out.endpoint_side = side_of(end.position);
    return out;
}

}  // namespace walklab
