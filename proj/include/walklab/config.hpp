#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "walklab/common.hpp"
#include "walklab/estimators.hpp"
#include "walklab/increment_law.hpp"
#include "walklab/limit_checks.hpp"
#include "walklab/mechanism.hpp"

namespace walklab {

// Run configuration: one JSON document describing the walk, the absorption
// mechanism, and per-subcommand parameters. Serialization always emits every
// field, so parse -> serialize -> parse is the identity.

using Json = nlohmann::ordered_json;

namespace detail {

inline void expect_keys(const Json& j, std::initializer_list<const char*> keys, const char* what) {
    require(j.is_object(), Errc::invalid_spec, std::string(what) + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) known |= item.key() == k;
        require(known, Errc::invalid_spec, std::string(what) + ": unknown key '" + item.key() + "'");
    }
}

template <class T>
T get_req(const Json& j, const char* key, const char* what) {
    require(j.contains(key), Errc::invalid_spec, std::string(what) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(Errc::invalid_spec, std::string(what) + ": key '" + key + "' has the wrong type");
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const char* what) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(Errc::invalid_spec, std::string(what) + ": key '" + key + "' has the wrong type");
    }
}

}  // namespace detail

struct IncrementSpec {
    std::string kind = "rademacher";  // rademacher | lattice | gaussian | uniform
    double span = 1.0;                // lattice
    std::vector<long long> points;    // lattice
    std::vector<double> probs;        // lattice
    double sigma = 1.0;               // gaussian
    double half_width = 1.0;          // uniform

    IncrementLaw build() const {
        if (kind == "rademacher") return IncrementLaw::rademacher();
        if (kind == "lattice") return IncrementLaw::lattice(span, points, probs);
        if (kind == "gaussian") return IncrementLaw::gaussian(sigma);
        if (kind == "uniform") return IncrementLaw::uniform_centered(half_width);
        fail(Errc::invalid_spec, "unknown increment kind '" + kind + "'");
    }

    static IncrementSpec from_json(const Json& j) {
        detail::expect_keys(j, {"kind", "span", "points", "probs", "sigma", "half_width"}, "increment");
        IncrementSpec s;
        s.kind = detail::get_req<std::string>(j, "kind", "increment");
        if (s.kind == "lattice") {
            s.span = detail::get_req<double>(j, "span", "increment");
            s.points = detail::get_req<std::vector<long long>>(j, "points", "increment");
            s.probs = detail::get_req<std::vector<double>>(j, "probs", "increment");
        } else if (s.kind == "gaussian") {
            s.sigma = detail::get_req<double>(j, "sigma", "increment");
        } else if (s.kind == "uniform") {
            s.half_width = detail::get_req<double>(j, "half_width", "increment");
        } else {
            require(s.kind == "rademacher", Errc::invalid_spec,
                    "unknown increment kind '" + s.kind + "'");
        }
        return s;
    }

    Json to_json() const {
        Json j;
        j["kind"] = kind;
        if (kind == "lattice") {
            j["span"] = span;
            j["points"] = points;
            j["probs"] = probs;
        } else if (kind == "gaussian") {
            j["sigma"] = sigma;
        } else if (kind == "uniform") {
            j["half_width"] = half_width;
        }
        return j;
    }
};

inline MechanismFamily family_from_name(const std::string& name) {
    for (MechanismFamily f :
         {MechanismFamily::never_absorb, MechanismFamily::time_below_zero, MechanismFamily::position_hazard,
          MechanismFamily::avoid_sets, MechanismFamily::interval_gate})
        if (name == family_name(f)) return f;
    fail(Errc::invalid_spec, "unknown mechanism family '" + name + "'");
}

inline MechanismSpec mechanism_from_json(const Json& j) {
    MechanismSpec m;
    m.family = family_from_name(detail::get_req<std::string>(j, "family", "mechanism"));
    switch (m.family) {
        case MechanismFamily::never_absorb:
            detail::expect_keys(j, {"family"}, "mechanism");
            break;
        case MechanismFamily::time_below_zero: {
            detail::expect_keys(j, {"family", "u"}, "mechanism");
            require(j.contains("u"), Errc::invalid_spec, "mechanism: time-below-zero needs a budget law u");
            const Json& u = j.at("u");
            detail::expect_keys(u, {"kind", "q", "m", "support", "probs", "p_inf"}, "mechanism.u");
            std::string kind = detail::get_req<std::string>(u, "kind", "mechanism.u");
            if (kind == "geometric") {
                m.u.kind = ULawSpec::Kind::geometric;
                m.u.q = detail::get_req<double>(u, "q", "mechanism.u");
            } else if (kind == "deterministic") {
                m.u.kind = ULawSpec::Kind::deterministic;
                m.u.m = detail::get_req<std::uint64_t>(u, "m", "mechanism.u");
            } else if (kind == "tabulated") {
                m.u.kind = ULawSpec::Kind::tabulated;
                auto support = detail::get_req<std::vector<std::uint64_t>>(u, "support", "mechanism.u");
                auto probs = detail::get_req<std::vector<double>>(u, "probs", "mechanism.u");
                require(support.size() == probs.size(), Errc::invalid_spec,
                        "mechanism.u: support and probs must have the same length");
                for (std::size_t i = 0; i < support.size(); ++i) m.u.pmf.emplace_back(support[i], probs[i]);
                m.u.p_inf = detail::get_or<double>(u, "p_inf", 0.0, "mechanism.u");
            } else {
                fail(Errc::invalid_spec, "unknown budget law kind '" + kind + "'");
            }
            break;
        }
        case MechanismFamily::position_hazard: {
            detail::expect_keys(j, {"family", "breaks", "values", "liminf"}, "mechanism");
            m.hazard_breaks = detail::get_or<std::vector<double>>(j, "breaks", {}, "mechanism");
            m.hazard_values = detail::get_req<std::vector<double>>(j, "values", "mechanism");
            if (j.contains("liminf")) {
                const Json& l = j.at("liminf");
                detail::expect_keys(l, {"L", "p_min"}, "mechanism.liminf");
                m.hazard_liminf = {detail::get_req<double>(l, "L", "mechanism.liminf"),
                                   detail::get_req<double>(l, "p_min", "mechanism.liminf")};
            }
            break;
        }
        case MechanismFamily::avoid_sets: {
            detail::expect_keys(j, {"family", "choice_probs", "sets"}, "mechanism");
            m.avoid_pmf = detail::get_req<std::vector<double>>(j, "choice_probs", "mechanism");
            require(j.contains("sets"), Errc::invalid_spec, "mechanism: avoid-sets needs a sets list");
            const Json& sets = j.at("sets");
            require(sets.is_array(), Errc::invalid_spec, "mechanism: sets must be an array");
            for (const Json& set : sets) {
                require(set.is_array(), Errc::invalid_spec, "mechanism: each avoided set must be an array");
                std::vector<Interval> ivs;
                for (const Json& iv : set) {
                    require(iv.is_array() && iv.size() == 2, Errc::invalid_spec,
                            "mechanism: each avoided interval must be a [lo, hi] pair");
                    ivs.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
                }
                m.avoid_sets.push_back(std::move(ivs));
            }
            break;
        }
        case MechanismFamily::interval_gate: {
            detail::expect_keys(j, {"family", "lo", "hi", "exempt_initial_segment"}, "mechanism");
            m.gate.lo = detail::get_req<double>(j, "lo", "mechanism");
            m.gate.hi = detail::get_req<double>(j, "hi", "mechanism");
            m.exempt_initial_segment =
                detail::get_or<bool>(j, "exempt_initial_segment", false, "mechanism");
            break;
        }
    }
    return m;
}

inline Json mechanism_to_json(const MechanismSpec& m) {
    Json j;
    j["family"] = family_name(m.family);
    switch (m.family) {
        case MechanismFamily::never_absorb:
            break;
        case MechanismFamily::time_below_zero: {
            Json u;
            switch (m.u.kind) {
                case ULawSpec::Kind::geometric:
                    u["kind"] = "geometric";
                    u["q"] = m.u.q;
                    break;
                case ULawSpec::Kind::deterministic:
                    u["kind"] = "deterministic";
                    u["m"] = m.u.m;
                    break;
                case ULawSpec::Kind::tabulated: {
                    u["kind"] = "tabulated";
                    std::vector<std::uint64_t> support;
                    std::vector<double> probs;
                    for (const auto& [k, p] : m.u.pmf) {
                        support.push_back(k);
                        probs.push_back(p);
                    }
                    u["support"] = support;
                    u["probs"] = probs;
                    u["p_inf"] = m.u.p_inf;
                    break;
                }
            }
            j["u"] = u;
            break;
        }
        case MechanismFamily::position_hazard:
            j["breaks"] = m.hazard_breaks;
            j["values"] = m.hazard_values;
            if (m.hazard_liminf)
                j["liminf"] = Json{{"L", m.hazard_liminf->first}, {"p_min", m.hazard_liminf->second}};
            break;
        case MechanismFamily::avoid_sets: {
            j["choice_probs"] = m.avoid_pmf;
            Json sets = Json::array();
            for (const auto& set : m.avoid_sets) {
                Json s = Json::array();
                for (const Interval& iv : set) s.push_back(Json::array({iv.lo, iv.hi}));
                sets.push_back(s);
            }
            j["sets"] = sets;
            break;
        }
        case MechanismFamily::interval_gate:
            j["lo"] = m.gate.lo;
            j["hi"] = m.gate.hi;
            j["exempt_initial_segment"] = m.exempt_initial_segment;
            break;
    }
    return j;
}

struct HorizonSpec {
    std::vector<std::uint64_t> list;  // explicit grid wins when non-empty
    std::uint64_t max = 1024;
    std::uint64_t base = 64;

    std::vector<std::uint64_t> build() const {
        if (!list.empty()) {
            detail::check_horizons(list);
            return list;
        }
        return geometric_horizons(max, base);
    }

    static HorizonSpec from_json(const Json& j) {
        detail::expect_keys(j, {"list", "max", "base"}, "horizons");
        HorizonSpec h;
        h.list = detail::get_or<std::vector<std::uint64_t>>(j, "list", {}, "horizons");
        h.max = detail::get_or<std::uint64_t>(j, "max", h.max, "horizons");
        h.base = detail::get_or<std::uint64_t>(j, "base", h.base, "horizons");
        for (std::size_t i = 0; i < h.list.size(); ++i) {
            require(h.list[i] >= 1, Errc::invalid_spec, "horizons: entries must be at least 1");
            require(i == 0 || h.list[i] > h.list[i - 1], Errc::invalid_spec,
                    "horizons: list must be strictly increasing");
        }
        if (h.list.empty())
            require(h.base >= 1 && h.max >= h.base, Errc::invalid_spec,
                    "horizons: max must be at least base");
        return h;
    }

    Json to_json() const {
        Json j;
        if (!list.empty()) {
            j["list"] = list;
        } else {
            j["max"] = max;
            j["base"] = base;
        }
        return j;
    }
};

struct SimulateConfig {
    std::uint64_t n = 1024;
    bool trajectory = false;
};

struct UFnConfig {
    std::vector<double> y_grid{0.0};
    std::uint64_t n_large = 16384;
};

struct VConstConfig {
    int k_max = 30;
    std::uint64_t n_large = 16384;
    double u_lo = -1.0;  // height range covered by the dp-backed u-provider
    double u_hi = 1.0;
};

struct RhoConfig {
    std::uint64_t n = 4096;
};

struct OracleConfig {
    std::string op = "survival";  // survival | no-crossing | u | endpoint | enumerate
    std::uint64_t n = 1024;       // endpoint / enumerate horizon
};

struct CheckConfig {
    std::string condition = "c1";
    std::uint32_t k_max = 8;           // c1
    std::vector<double> y_grid{0.0};   // c2
    double epsilon = c3_default_epsilon;
    double tolerance = c2_default_tolerance;
    double ks_threshold = c4_default_ks_threshold;
    double r2_min = c1_default_r2_min;
    std::uint64_t n = 4096;            // c4 horizon
    std::uint64_t survivor_target = 100;
};

struct RunConfig {
    IncrementSpec increment;
    MechanismSpec mechanism;
    std::vector<double> x{0.0};
    HorizonSpec horizons;
    std::uint64_t total_paths = 100000;
    std::uint64_t seed = 1;
    std::string mode = "mc";  // mc | dp | both
    std::uint64_t step_cap = default_step_cap;
    std::string out_dir = ".";
    SimulateConfig simulate;
    UFnConfig u_fn;
    VConstConfig v_const;
    RhoConfig rho;
    OracleConfig oracle;
    CheckConfig check;

    static RunConfig from_json(const Json& j) {
        detail::expect_keys(j,
                            {"increment", "mechanism", "x", "horizons", "total_paths", "seed", "mode",
                             "step_cap", "out_dir", "simulate", "u_fn", "v_const", "rho", "oracle", "check"},
                            "config");
        RunConfig c;
        if (j.contains("increment")) c.increment = IncrementSpec::from_json(j.at("increment"));
        if (j.contains("mechanism")) c.mechanism = mechanism_from_json(j.at("mechanism"));
        c.x = detail::get_or<std::vector<double>>(j, "x", c.x, "config");
        require(!c.x.empty(), Errc::invalid_spec, "config: x must hold at least one start point");
        if (j.contains("horizons")) c.horizons = HorizonSpec::from_json(j.at("horizons"));
        c.total_paths = detail::get_or<std::uint64_t>(j, "total_paths", c.total_paths, "config");
        c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed, "config");
        c.mode = detail::get_or<std::string>(j, "mode", c.mode, "config");
        require(c.mode == "mc" || c.mode == "dp" || c.mode == "both", Errc::invalid_spec,
                "config: mode must be one of mc, dp, both");
        c.step_cap = detail::get_or<std::uint64_t>(j, "step_cap", c.step_cap, "config");
        c.out_dir = detail::get_or<std::string>(j, "out_dir", c.out_dir, "config");
        if (j.contains("simulate")) {
            const Json& s = j.at("simulate");
            detail::expect_keys(s, {"n", "trajectory"}, "simulate");
            c.simulate.n = detail::get_or<std::uint64_t>(s, "n", c.simulate.n, "simulate");
            c.simulate.trajectory = detail::get_or<bool>(s, "trajectory", false, "simulate");
        }
        if (j.contains("u_fn")) {
            const Json& u = j.at("u_fn");
            detail::expect_keys(u, {"y_grid", "n_large"}, "u_fn");
            c.u_fn.y_grid = detail::get_or<std::vector<double>>(u, "y_grid", c.u_fn.y_grid, "u_fn");
            c.u_fn.n_large = detail::get_or<std::uint64_t>(u, "n_large", c.u_fn.n_large, "u_fn");
        }
        if (j.contains("v_const")) {
            const Json& v = j.at("v_const");
            detail::expect_keys(v, {"k_max", "n_large", "u_lo", "u_hi"}, "v_const");
            c.v_const.k_max = detail::get_or<int>(v, "k_max", c.v_const.k_max, "v_const");
            c.v_const.n_large = detail::get_or<std::uint64_t>(v, "n_large", c.v_const.n_large, "v_const");
            c.v_const.u_lo = detail::get_or<double>(v, "u_lo", c.v_const.u_lo, "v_const");
            c.v_const.u_hi = detail::get_or<double>(v, "u_hi", c.v_const.u_hi, "v_const");
        }
        if (j.contains("rho")) {
            const Json& r = j.at("rho");
            detail::expect_keys(r, {"n"}, "rho");
            c.rho.n = detail::get_or<std::uint64_t>(r, "n", c.rho.n, "rho");
        }
        if (j.contains("oracle")) {
            const Json& o = j.at("oracle");
            detail::expect_keys(o, {"op", "n"}, "oracle");
            c.oracle.op = detail::get_or<std::string>(o, "op", c.oracle.op, "oracle");
            c.oracle.n = detail::get_or<std::uint64_t>(o, "n", c.oracle.n, "oracle");
        }
        if (j.contains("check")) {
            const Json& k = j.at("check");
            detail::expect_keys(k,
                                {"condition", "k_max", "y_grid", "epsilon", "tolerance", "ks_threshold",
                                 "r2_min", "n", "survivor_target"},
                                "check");
            c.check.condition = detail::get_or<std::string>(k, "condition", c.check.condition, "check");
            c.check.k_max = detail::get_or<std::uint32_t>(k, "k_max", c.check.k_max, "check");
            c.check.y_grid = detail::get_or<std::vector<double>>(k, "y_grid", c.check.y_grid, "check");
            c.check.epsilon = detail::get_or<double>(k, "epsilon", c.check.epsilon, "check");
            c.check.tolerance = detail::get_or<double>(k, "tolerance", c.check.tolerance, "check");
            c.check.ks_threshold = detail::get_or<double>(k, "ks_threshold", c.check.ks_threshold, "check");
            c.check.r2_min = detail::get_or<double>(k, "r2_min", c.check.r2_min, "check");
            c.check.n = detail::get_or<std::uint64_t>(k, "n", c.check.n, "check");
            c.check.survivor_target =
                detail::get_or<std::uint64_t>(k, "survivor_target", c.check.survivor_target, "check");
        }
        // Surface bad mechanism parameters at load time rather than mid-run.
        (void)build_mechanism(c.mechanism);
        return c;
    }

    Json to_json() const {
        Json j;
        j["increment"] = increment.to_json();
        j["mechanism"] = mechanism_to_json(mechanism);
        j["x"] = x;
        j["horizons"] = horizons.to_json();
        j["total_paths"] = total_paths;
        j["seed"] = seed;
        j["mode"] = mode;
        j["step_cap"] = step_cap;
        j["out_dir"] = out_dir;
        j["simulate"] = Json{{"n", simulate.n}, {"trajectory", simulate.trajectory}};
        j["u_fn"] = Json{{"y_grid", u_fn.y_grid}, {"n_large", u_fn.n_large}};
        j["v_const"] = Json{{"k_max", v_const.k_max},
                            {"n_large", v_const.n_large},
                            {"u_lo", v_const.u_lo},
                            {"u_hi", v_const.u_hi}};
        j["rho"] = Json{{"n", rho.n}};
        j["oracle"] = Json{{"op", oracle.op}, {"n", oracle.n}};
        j["check"] = Json{{"condition", check.condition},
                          {"k_max", check.k_max},
                          {"y_grid", check.y_grid},
                          {"epsilon", check.epsilon},
                          {"tolerance", check.tolerance},
                          {"ks_threshold", check.ks_threshold},
                          {"r2_min", check.r2_min},
                          {"n", check.n},
                          {"survivor_target", check.survivor_target}};
        return j;
    }

    static RunConfig parse(const std::string& text) {
        Json j;
        try {
            j = Json::parse(text);
        } catch (const Json::exception& e) {
            fail(Errc::invalid_spec, std::string("config is not valid JSON: ") + e.what());
        }
        return from_json(j);
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), Errc::io_error, "cannot open config file '" + path + "'");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text);
    }
};

}  // namespace walklab
