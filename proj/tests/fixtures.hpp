#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "walklab/mechanism.hpp"

// Mechanism specs the suites keep coming back to.

inline walklab::MechanismSpec never_spec() { return {}; }

inline walklab::MechanismSpec immediate_kill_spec() {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::position_hazard;
    m.hazard_values = {1.0};
    return m;
}

inline walklab::MechanismSpec geometric_tbz_spec(double q) {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::time_below_zero;
    m.u.kind = walklab::ULawSpec::Kind::geometric;
    m.u.q = q;
    return m;
}

inline walklab::MechanismSpec deterministic_tbz_spec(std::uint64_t steps) {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::time_below_zero;
    m.u.kind = walklab::ULawSpec::Kind::deterministic;
    m.u.m = steps;
    return m;
}

inline walklab::MechanismSpec tabulated_tbz_spec(std::vector<std::pair<std::uint64_t, double>> pmf,
                                                 double p_inf) {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::time_below_zero;
    m.u.kind = walklab::ULawSpec::Kind::tabulated;
    m.u.pmf = std::move(pmf);
    m.u.p_inf = p_inf;
    return m;
}

inline walklab::MechanismSpec hazard_spec(std::vector<double> breaks, std::vector<double> values) {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::position_hazard;
    m.hazard_breaks = std::move(breaks);
    m.hazard_values = std::move(values);
    return m;
}

inline walklab::MechanismSpec avoid_spec(std::vector<double> pmf,
                                         std::vector<std::vector<walklab::Interval>> sets) {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::avoid_sets;
    m.avoid_pmf = std::move(pmf);
    m.avoid_sets = std::move(sets);
    return m;
}

inline walklab::MechanismSpec gate_spec(double lo, double hi, bool exempt_initial = false) {
    walklab::MechanismSpec m;
    m.family = walklab::MechanismFamily::interval_gate;
    m.gate = {lo, hi};
    m.exempt_initial_segment = exempt_initial;
    return m;
}

// Fresh scratch directory under the system temp root.
inline std::filesystem::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    std::filesystem::path p = std::filesystem::temp_directory_path() /
                              ("walklab_" + tag + "_" + std::to_string(++counter));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}
