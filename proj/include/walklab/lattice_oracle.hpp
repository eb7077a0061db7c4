#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include "walklab/common.hpp"
#include "walklab/estimators.hpp"
#include "walklab/increment_law.hpp"
#include "walklab/mechanism.hpp"

namespace walklab::oracle {

// Exact distribution evolution on the increment lattice. Masses are doubles;
// enumerate_small provides exact rationals on tiny instances to bound the
// floating error of the recursion.

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::rational<BigInt>;

namespace detail {

inline long long to_units(double v, double span, const char* what) {
    double q = v / span;
    double r = std::nearbyint(q);
    require(std::abs(q - r) <= 1e-9, Errc::bad_argument,
            std::string(what) + " must sit on the increment lattice");
    return static_cast<long long>(r);
}

struct Grid {
    double span = 1.0;
    long long min_units = 0;
    std::size_t width = 0;
    std::size_t x_idx = 0;

    double real_at(std::size_t i) const {
        return static_cast<double>(min_units + static_cast<long long>(i)) * span;
    }
    bool neg_at(std::size_t i) const { return min_units + static_cast<long long>(i) < 0; }
};

inline Grid make_grid(double x, const IncrementLaw& law, std::uint64_t n_max) {
    require(law.is_lattice(), Errc::incompatible_mechanism,
            "the exact oracle needs a lattice increment law");
    Grid g;
    g.span = law.span();
    long long x_units = to_units(x, g.span, "start point");
    long long lo = x_units + static_cast<long long>(n_max) * law.min_step();
    long long hi = x_units + static_cast<long long>(n_max) * law.max_step();
    g.min_units = lo;
    g.width = static_cast<std::size_t>(hi - lo) + 1;
    g.x_idx = static_cast<std::size_t>(x_units - lo);
    return g;
}

// Single-layer families (never-absorb, position-hazard, geometric
// time-below-zero, interval-gate): the arrival factor depends only on the
// target cell and on whether the step changed sides.
struct TablesModel {
    std::vector<double> f_same;
    std::vector<double> f_cross;
    double init_factor = 1.0;

    int layers() const { return 1; }
    template <class Emit>
    void init(std::size_t x_idx, Emit&& emit) const {
        emit(0, x_idx, init_factor);
    }
    template <class Emit>
    void move(int, bool from_neg, std::size_t to, bool to_neg, Emit&& emit) const {
        emit(0, from_neg == to_neg ? f_same[to] : f_cross[to]);
    }
};

// Time-below-zero with bounded-support U: one layer per segment age below
// zero; ages saturate at the largest finite support point A, beyond which the
// only surviving mass is the U = infinity atom.
struct AgeModel {
    std::vector<double> arrival_ratio;  // [a] = P(U > a) / P(U > a-1), a = 0..A+1
    int max_age = 0;                    // A

    int layers() const { return max_age + 1; }
    template <class Emit>
    void init(std::size_t x_idx, Emit&& emit) const {
        emit(0, x_idx, 1.0);  // age-0 kill is impossible: U >= 1
    }
    template <class Emit>
    void move(int layer, bool from_neg, std::size_t, bool to_neg, Emit&& emit) const {
        if (!to_neg || !from_neg) {
            emit(0, 1.0);  // nonnegative side, or a fresh below-zero segment at age 0
            return;
        }
        int a = layer + 1;
        if (a > max_age)
            emit(max_age, arrival_ratio[static_cast<std::size_t>(max_age) + 1]);
        else
            emit(a, arrival_ratio[static_cast<std::size_t>(a)]);
    }
};

// Avoid-sets: layer 0 carries mass on the nonnegative side, layer u + 1
// carries below-zero mass whose segment drew set u.
struct SetModel {
    std::vector<double> pmf;
    std::vector<std::vector<char>> outside;  // outside[u][idx]: position not in B_u

    int layers() const { return static_cast<int>(pmf.size()) + 1; }
    template <class Emit>
    void init(std::size_t x_idx, Emit&& emit) const {
        emit(0, x_idx, 1.0);
    }
    template <class Emit>
    void split_init(std::size_t x_idx, Emit&& emit) const {
        for (std::size_t u = 0; u < pmf.size(); ++u)
            if (pmf[u] > 0.0 && outside[u][x_idx]) emit(static_cast<int>(u) + 1, x_idx, pmf[u]);
    }
    template <class Emit>
    void move(int layer, bool, std::size_t to, bool to_neg, Emit&& emit) const {
        if (!to_neg) {
            emit(0, 1.0);
            return;
        }
        if (layer == 0) {
            for (std::size_t u = 0; u < pmf.size(); ++u)
                if (pmf[u] > 0.0 && outside[u][to]) emit(static_cast<int>(u) + 1, pmf[u]);
        } else if (outside[static_cast<std::size_t>(layer) - 1][to]) {
            emit(layer, 1.0);
        }
    }
};

struct DpRequest {
    std::vector<std::uint64_t> horizons;  // strictly increasing
    bool no_crossing = false;
    bool want_final = false;
};

struct DpOutput {
    std::vector<double> totals;      // per horizon
    std::vector<double> final_mass;  // per grid index, summed over layers
};

template <class Model>
DpOutput dp_run(const Grid& g, const IncrementLaw& law, const Model& model, const DpRequest& req) {
    for (std::size_t i = 1; i < req.horizons.size(); ++i)
        require(req.horizons[i] > req.horizons[i - 1], Errc::bad_argument,
                "horizons must be strictly increasing");
    const std::uint64_t n_max = req.horizons.empty() ? 0 : req.horizons.back();

    const int layers = model.layers();
    const std::size_t width = g.width;
    std::vector<double> cur(static_cast<std::size_t>(layers) * width, 0.0);
    std::vector<double> nxt(cur.size(), 0.0);
    auto layer_of = [width](std::vector<double>& v, int l) { return v.data() + static_cast<std::size_t>(l) * width; };

    const bool start_neg = g.neg_at(g.x_idx);
    auto deposit = [&](int l, std::size_t i, double m) { layer_of(cur, l)[i] += m; };
    if constexpr (requires(const Model& m) { m.split_init(std::size_t{0}, deposit); }) {
        if (start_neg)
            model.split_init(g.x_idx, deposit);
        else
            model.init(g.x_idx, deposit);
    } else {
        model.init(g.x_idx, deposit);
    }

    std::size_t lo = g.x_idx, hi = g.x_idx;
    const auto& steps = law.points();
    const auto& probs = law.probs();
    const long long min_step = law.min_step(), max_step = law.max_step();

    DpOutput out;
    std::size_t next_h = 0;
    auto record = [&](std::uint64_t t) {
        while (next_h < req.horizons.size() && req.horizons[next_h] == t) {
            double total = 0.0;
            for (int l = 0; l < layers; ++l) {
                const double* m = layer_of(cur, l);
                for (std::size_t i = lo; i <= hi; ++i) total += m[i];
            }
            out.totals.push_back(total);
            ++next_h;
        }
    };
    record(0);

    for (std::uint64_t t = 1; t <= n_max; ++t) {
        std::size_t nlo = static_cast<std::size_t>(static_cast<long long>(lo) + min_step);
        std::size_t nhi = static_cast<std::size_t>(static_cast<long long>(hi) + max_step);
        for (int l = 0; l < layers; ++l) std::fill(layer_of(nxt, l) + nlo, layer_of(nxt, l) + nhi + 1, 0.0);

        for (int l = 0; l < layers; ++l) {
            const double* src = layer_of(cur, l);
            for (std::size_t i = lo; i <= hi; ++i) {
                double m = src[i];
                if (m == 0.0) continue;
                bool from_neg = g.neg_at(i);
                for (std::size_t j = 0; j < steps.size(); ++j) {
                    std::size_t to = static_cast<std::size_t>(static_cast<long long>(i) + steps[j]);
                    bool to_neg = g.neg_at(to);
                    if (req.no_crossing && to_neg != start_neg) continue;
                    double mp = m * probs[j];
                    model.move(l, from_neg, to, to_neg,
                               [&](int l2, double f) { layer_of(nxt, l2)[to] += mp * f; });
                }
            }
        }
        lo = nlo;
        hi = nhi;
        std::swap(cur, nxt);
        record(t);
    }

    if (req.want_final) {
        out.final_mass.assign(width, 0.0);
        for (int l = 0; l < layers; ++l) {
            const double* m = layer_of(cur, l);
            for (std::size_t i = lo; i <= hi; ++i) out.final_mass[i] += m[i];
        }
    }
    return out;
}

// Dispatch shell: builds the family-appropriate model and runs it.
inline DpOutput dp_dispatch(const Grid& g, const IncrementLaw& law, const SegmentMechanism& mech,
                            const DpRequest& req) {
    const MechanismSpec& spec = mech.spec();
    switch (spec.family) {
        case MechanismFamily::never_absorb: {
            TablesModel m;
            m.f_same.assign(g.width, 1.0);
            m.f_cross.assign(g.width, 1.0);
            return dp_run(g, law, m, req);
        }
        case MechanismFamily::position_hazard: {
            TablesModel m;
            m.f_same.resize(g.width);
            for (std::size_t i = 0; i < g.width; ++i)
                m.f_same[i] = g.neg_at(i) ? 1.0 - mech.hazard_at(g.real_at(i)) : 1.0;
            m.f_cross = m.f_same;
            m.init_factor = g.neg_at(g.x_idx) ? 1.0 - mech.hazard_at(g.real_at(g.x_idx)) : 1.0;
            return dp_run(g, law, m, req);
        }
        case MechanismFamily::interval_gate: {
            TablesModel m;
            m.f_same.assign(g.width, 1.0);
            m.f_cross.resize(g.width);
            for (std::size_t i = 0; i < g.width; ++i) {
                double r = g.real_at(i);
                m.f_cross[i] = (spec.gate.lo < r && r < spec.gate.hi) ? 1.0 : 0.0;
            }
            double x_real = g.real_at(g.x_idx);
            m.init_factor = spec.exempt_initial_segment || (spec.gate.lo < x_real && x_real < spec.gate.hi)
                                ? 1.0
                                : 0.0;
            return dp_run(g, law, m, req);
        }
        case MechanismFamily::time_below_zero: {
            if (spec.u.kind == ULawSpec::Kind::geometric) {
                TablesModel m;
                m.f_same.resize(g.width);
                for (std::size_t i = 0; i < g.width; ++i)
                    m.f_same[i] = g.neg_at(i) ? 1.0 - spec.u.q : 1.0;
                m.f_cross.assign(g.width, 1.0);
                return dp_run(g, law, m, req);
            }
            AgeModel m;
            std::uint64_t A = mech.u_max_finite();
            m.max_age = static_cast<int>(A);
            m.arrival_ratio.resize(A + 2);
            double prev_tail = 1.0;
            for (std::uint64_t a = 0; a <= A; ++a) {
                double tail = mech.u_tail(a);
                m.arrival_ratio[a] = prev_tail > 0.0 ? tail / prev_tail : 0.0;
                prev_tail = tail;
            }
            m.arrival_ratio[A + 1] = mech.u_mass_at_infinity() > 0.0 ? 1.0 : 0.0;
            return dp_run(g, law, m, req);
        }
        case MechanismFamily::avoid_sets: {
            SetModel m;
            m.pmf = spec.avoid_pmf;
            m.outside.resize(spec.avoid_sets.size());
            for (std::size_t u = 0; u < spec.avoid_sets.size(); ++u) {
                m.outside[u].resize(g.width);
                for (std::size_t i = 0; i < g.width; ++i)
                    m.outside[u][i] =
                        walklab::detail::in_half_open(spec.avoid_sets[u], g.real_at(i)) ? 0 : 1;
            }
            return dp_run(g, law, m, req);
        }
    }
    fail(Errc::incompatible_mechanism, "unsupported mechanism family");
}

}  // namespace detail

// P_x(tau > n) for every requested horizon.
inline std::vector<double> dp_survival(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                       const std::vector<std::uint64_t>& horizons) {
    detail::Grid g = detail::make_grid(x, law, horizons.empty() ? 0 : horizons.back());
    detail::DpRequest req;
    req.horizons = horizons;
    return detail::dp_dispatch(g, law, mech, req).totals;
}

// P_y(tau > n, T_1 > n): same evolution with side-changing mass removed.
inline std::vector<double> dp_no_crossing_survival(double y, const IncrementLaw& law,
                                                   const SegmentMechanism& mech,
                                                   const std::vector<std::uint64_t>& horizons) {
    detail::Grid g = detail::make_grid(y, law, horizons.empty() ? 0 : horizons.back());
    detail::DpRequest req;
    req.horizons = horizons;
    req.no_crossing = true;
    return detail::dp_dispatch(g, law, mech, req).totals;
}

// Finite-n stand-in for u(y) = lim sqrt(n) P_y(tau > n, T_1 > n).
inline double dp_u(double y, const IncrementLaw& law, const SegmentMechanism& mech, std::uint64_t n_large) {
    require(n_large >= 1, Errc::bad_argument, "n_large must be at least 1");
    std::vector<double> v = dp_no_crossing_survival(y, law, mech, {n_large});
    return std::sqrt(static_cast<double>(n_large)) * v.front();
}

struct EndpointDistribution {
    double span = 1.0;
    std::vector<long long> positions;  // lattice units, ascending
    std::vector<double> mass;          // conditional on survival, sums to 1
    double survival = 0.0;             // unconditional P_x(tau > n)
};

inline EndpointDistribution dp_endpoint_distribution(double x, const IncrementLaw& law,
                                                     const SegmentMechanism& mech, std::uint64_t n) {
    detail::Grid g = detail::make_grid(x, law, n);
    detail::DpRequest req;
    req.horizons = {n};
    req.want_final = true;
    detail::DpOutput out = detail::dp_dispatch(g, law, mech, req);
    EndpointDistribution dist;
    dist.span = g.span;
    dist.survival = out.totals.front();
    require(dist.survival > 0.0, Errc::zero_survival, "no surviving mass at the requested horizon");
    for (std::size_t i = 0; i < out.final_mass.size(); ++i) {
        if (out.final_mass[i] == 0.0) continue;
        dist.positions.push_back(g.min_units + static_cast<long long>(i));
        dist.mass.push_back(out.final_mass[i] / dist.survival);
    }
    return dist;
}

// Exact survival curve in the Monte Carlo curve shape: zero path counts and
// degenerate intervals mark the values as oracle output.
inline SurvivalCurve dp_curve(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                              const std::vector<std::uint64_t>& horizons) {
    SurvivalCurve curve;
    curve.x = x;
    curve.horizons = horizons;
    curve.survivors.assign(horizons.size(), 0);
    curve.total_paths = 0;
    curve.estimates = dp_survival(x, law, mech, horizons);
    curve.ci_low = curve.estimates;
    curve.ci_high = curve.estimates;
    return curve;
}

// u-provider backed by dp_u on the integer lattice heights of [lo, hi],
// linearly interpolated in between and undefined outside.
inline UProvider make_dp_u_provider(const IncrementLaw& law, const SegmentMechanism& mech,
                                    std::uint64_t n_large, double lo, double hi) {
    require(law.is_lattice(), Errc::incompatible_mechanism, "the dp u-provider needs a lattice law");
    const double span = law.span();
    long long lo_units = static_cast<long long>(std::floor(lo / span));
    long long hi_units = static_cast<long long>(std::ceil(hi / span));
    require(lo_units <= hi_units, Errc::bad_argument, "empty u-provider range");

    auto values = std::make_shared<std::vector<double>>();
    for (long long u = lo_units; u <= hi_units; ++u)
        values->push_back(dp_u(static_cast<double>(u) * span, law, mech, n_large));

    return [values, span, lo_units, hi_units](double y) -> std::optional<double> {
        double q = y / span;
        if (q < static_cast<double>(lo_units) || q > static_cast<double>(hi_units)) return std::nullopt;
        double f = std::floor(q);
        auto i = static_cast<std::size_t>(static_cast<long long>(f) - lo_units);
        double t = q - f;
        if (t == 0.0 || i + 1 >= values->size()) return (*values)[i];
        return (1.0 - t) * (*values)[i] + t * (*values)[i + 1];
    };
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration oracle: exact rational P_x(tau > n) straight from
// the mechanism definitions, independent of the recursion above.

namespace detail {

inline Rational exact_of_double(double v) {
    require(std::isfinite(v), Errc::bad_argument, "cannot convert non-finite value");
    if (v == 0.0) return Rational(0);
    int exp = 0;
    double m = std::frexp(v, &exp);
    auto mant = static_cast<long long>(std::ldexp(m, 53));
    int e = exp - 53;
    if (e >= 0) return Rational(BigInt(mant) << e, BigInt(1));
    return Rational(BigInt(mant), BigInt(1) << -e);
}

}  // namespace detail

inline Rational enumerate_small(double x, const IncrementLaw& law, const SegmentMechanism& mech,
                                std::uint64_t n, std::uint64_t max_paths = std::uint64_t(1) << 20) {
    require(law.is_lattice(), Errc::incompatible_mechanism, "enumeration needs a lattice increment law");
    const double span = law.span();
    const long long x_units = detail::to_units(x, span, "start point");
    const std::size_t s = law.points().size();

    double paths_d = std::pow(static_cast<double>(s), static_cast<double>(n));
    require(paths_d <= static_cast<double>(max_paths), Errc::too_large_instance,
            "instance too large to enumerate");
    const std::uint64_t total = static_cast<std::uint64_t>(paths_d);

    std::vector<Rational> step_prob(s);
    for (std::size_t j = 0; j < s; ++j) step_prob[j] = detail::exact_of_double(law.probs()[j]);

    const MechanismSpec& spec = mech.spec();

    // Exact per-mechanism ingredients.
    std::vector<Rational> u_tail;  // time-below-zero: P(U > i), i = 0..n
    if (spec.family == MechanismFamily::time_below_zero) {
        u_tail.resize(n + 1);
        switch (spec.u.kind) {
            case ULawSpec::Kind::geometric: {
                Rational keep = Rational(1) - detail::exact_of_double(spec.u.q);
                Rational acc(1);
                for (std::uint64_t i = 0; i <= n; ++i) {
                    u_tail[i] = acc;
                    acc *= keep;
                }
                break;
            }
            case ULawSpec::Kind::deterministic:
                for (std::uint64_t i = 0; i <= n; ++i) u_tail[i] = Rational(i < spec.u.m ? 1 : 0);
                break;
            case ULawSpec::Kind::tabulated:
                for (std::uint64_t i = 0; i <= n; ++i) {
                    Rational t = detail::exact_of_double(spec.u.p_inf);
                    for (const auto& [k, p] : spec.u.pmf)
                        if (k > i) t += detail::exact_of_double(p);
                    u_tail[i] = t;
                }
                break;
        }
    }
    std::vector<Rational> hazard_keep;  // 1 - p per hazard piece
    if (spec.family == MechanismFamily::position_hazard)
        for (double v : spec.hazard_values) hazard_keep.push_back(Rational(1) - detail::exact_of_double(v));
    std::vector<Rational> avoid_prob;
    if (spec.family == MechanismFamily::avoid_sets)
        for (double p : spec.avoid_pmf) avoid_prob.push_back(detail::exact_of_double(p));

    std::vector<long long> pos(n + 1);
    std::vector<std::size_t> digit(n, 0);

    auto survival_of_path = [&]() -> Rational {
        switch (spec.family) {
            case MechanismFamily::never_absorb:
                return Rational(1);
            case MechanismFamily::position_hazard: {
                Rational f(1);
                for (std::uint64_t t = 0; t <= n; ++t) {
                    if (pos[t] >= 0) continue;
                    double p = mech.hazard_at(static_cast<double>(pos[t]) * span);
                    if (p >= 1.0) return Rational(0);
                    if (p <= 0.0) continue;
                    std::size_t piece =
                        std::upper_bound(spec.hazard_breaks.begin(), spec.hazard_breaks.end(),
                                         static_cast<double>(pos[t]) * span) -
                        spec.hazard_breaks.begin();
                    f *= hazard_keep[piece];
                }
                return f;
            }
            case MechanismFamily::time_below_zero: {
                Rational f(1);
                std::uint64_t t = 0;
                while (t <= n) {
                    if (pos[t] >= 0) {
                        ++t;
                        continue;
                    }
                    std::uint64_t len = 0;
                    while (t <= n && pos[t] < 0) {
                        ++len;
                        ++t;
                    }
                    f *= u_tail[len - 1];  // survive ages 0..len-1 iff U > len-1
                    if (f == Rational(0)) return f;
                }
                return f;
            }
            case MechanismFamily::avoid_sets: {
                Rational f(1);
                std::uint64_t t = 0;
                while (t <= n) {
                    if (pos[t] >= 0) {
                        ++t;
                        continue;
                    }
                    std::uint64_t lo = t;
                    while (t <= n && pos[t] < 0) ++t;
                    Rational seg(0);
                    for (std::size_t u = 0; u < avoid_prob.size(); ++u) {
                        bool hit = false;
                        for (std::uint64_t m = lo; m < t && !hit; ++m)
                            hit = walklab::detail::in_half_open(spec.avoid_sets[u],
                                                                static_cast<double>(pos[m]) * span);
                        if (!hit) seg += avoid_prob[u];
                    }
                    f *= seg;
                    if (f == Rational(0)) return f;
                }
                return f;
            }
            case MechanismFamily::interval_gate: {
                auto inside = [&](long long u) {
                    double r = static_cast<double>(u) * span;
                    return spec.gate.lo < r && r < spec.gate.hi;
                };
                if (!spec.exempt_initial_segment && !inside(pos[0])) return Rational(0);
                for (std::uint64_t t = 1; t <= n; ++t) {
                    bool was_neg = pos[t - 1] < 0, is_neg = pos[t] < 0;
                    if (was_neg != is_neg && !inside(pos[t])) return Rational(0);
                }
                return Rational(1);
            }
        }
        return Rational(0);
    };

    Rational sum(0);
    for (std::uint64_t leaf = 0; leaf < total; ++leaf) {
        pos[0] = x_units;
        Rational prob(1);
        for (std::uint64_t t = 0; t < n; ++t) {
            pos[t + 1] = pos[t] + law.points()[digit[t]];
            prob *= step_prob[digit[t]];
        }
        Rational surv = survival_of_path();
        if (surv != Rational(0)) sum += prob * surv;

        // odometer
        for (std::uint64_t t = 0; t < n; ++t) {
            if (++digit[t] < s) break;
            digit[t] = 0;
        }
    }
    return sum;
}

}  // namespace walklab::oracle
