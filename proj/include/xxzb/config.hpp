#pragma once

// Run and sweep configuration as flat JSON documents. Every key is checked,
// unknown keys are rejected, and the parsed config can be emitted back with
// all defaults filled in.

#include <xxzb/analysis.hpp>
#include <xxzb/dmrg.hpp>
#include <xxzb/errors.hpp>
#include <xxzb/model.hpp>
#include <xxzb/prep.hpp>
#include <xxzb/tebd.hpp>

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace xxzb {

using Json = nlohmann::ordered_json;

enum class Engine { Mps, Oracle };

inline std::string to_string(Engine e) { return e == Engine::Mps ? "mps" : "oracle"; }

inline std::string to_string(SplittingScheme s) {
    switch (s) {
    case SplittingScheme::SecondOrder: return "second_order";
    case SplittingScheme::ForestRuth: return "forest_ruth";
    case SplittingScheme::Suzuki5: return "suzuki5";
    }
    return "?";
}

struct RunConfig {
    ChainSpec chain;
    SystemPrep prep;
    EvolutionConfig evolution;
    SplittingScheme scheme = SplittingScheme::Suzuki5;
    AnalysisWindow window;
    double decay_t0 = 0.0;  // start of the time-decay fit, which ends at window.T
    double revival_eps = kRevivalThreshold;
    double alpha_tol = 0.1;
    DmrgOptions dmrg;
    Engine engine = Engine::Mps;
    std::string output_dir = "out";
    std::string label = "run";
    std::uint64_t seed = 7;

    bool operator==(const RunConfig&) const = default;
};

enum class LeadRule { Equal, Double };  // N_b = N or N_b = 2N

struct SweepConfig {
    Json base = Json::object();  // raw base document without the axis keys
    std::vector<int> N_values;
    std::vector<double> Jz_values;
    std::vector<SystemPrep> preps;
    LeadRule lead_rule = LeadRule::Equal;
    int workers = 1;
    std::string output_dir = "out";
    std::string label = "sweep";

    bool operator==(const SweepConfig&) const = default;
};

struct SweepPoint {
    int N = 0;
    double Jz = 0.0;
    SystemPrep prep;
    std::string name;
    RunConfig config;
};

namespace detail {

inline std::string key_path(const std::string& prefix, const std::string& key) { return prefix + "." + key; }

inline void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ParseError(path, what);
}

class Reader {
  public:
    Reader(const Json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {
        require(doc.is_object(), prefix_, "expected a JSON object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return doc_.contains(key) && !doc_.at(key).is_null();
    }

    std::string path(const std::string& key) const { return key_path(prefix_, key); }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = doc_.at(key);
        require(v.is_number(), path(key), "expected a number");
        const double d = v.get<double>();
        require(std::isfinite(d), path(key), "must be finite");
        return d;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = doc_.at(key);
        require(v.is_number_integer(), path(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = doc_.at(key);
        require(v.is_string(), path(key), "expected a string");
        return v.get<std::string>();
    }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        return doc_.at(key);
    }

    void reject_unknown() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!seen_.count(it.key())) throw ParseError(path(it.key()), "unknown key");
    }

  private:
    const Json& doc_;
    std::string prefix_;
    std::set<std::string> seen_;
};

inline SystemPrep::Kind parse_prep_kind(const std::string& s, const std::string& path) {
    if (s == "ground") return SystemPrep::Kind::Ground;
    if (s == "ghz") return SystemPrep::Kind::GHZ;
    if (s == "neel") return SystemPrep::Kind::Neel;
    if (s == "bits") return SystemPrep::Kind::ExplicitBits;
    throw ParseError(path, "unknown preparation '" + s + "' (ground, ghz, neel, bits)");
}

inline SplittingScheme parse_scheme(const std::string& s, const std::string& path) {
    if (s == "suzuki5") return SplittingScheme::Suzuki5;
    if (s == "forest_ruth") return SplittingScheme::ForestRuth;
    if (s == "second_order") return SplittingScheme::SecondOrder;
    throw ParseError(path, "unknown scheme '" + s + "' (suzuki5, forest_ruth, second_order)");
}

inline int checked_int(std::int64_t v, const std::string& path, std::int64_t lo, std::int64_t hi = 1'000'000'000) {
    require(v >= lo && v <= hi, path, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

// Default decay-fit start: Jt = 5 when that leaves a window, else tau1.
inline double default_decay_start(const AnalysisWindow& w, double J) {
    return 5.0 / J < w.T ? 5.0 / J : w.tau1;
}

} // namespace detail

inline RunConfig parse_run_config(const Json& doc, const std::string& prefix = "$") {
    using detail::require;
    detail::Reader r(doc, prefix);
    RunConfig c;

    require(r.has("N"), r.path("N"), "required key missing");
    c.chain.N = detail::checked_int(r.integer("N", 0), r.path("N"), 2);
    c.chain.N_b = detail::checked_int(r.integer("N_b", c.chain.N), r.path("N_b"), 1);
    require(c.chain.N_b >= c.chain.N, r.path("N_b"),
            "lead length must satisfy N_b >= N (got N_b = " + std::to_string(c.chain.N_b) +
                ", N = " + std::to_string(c.chain.N) + ")");
    c.chain.J = r.number("J", 1.0);
    require(c.chain.J > 0.0, r.path("J"), "hopping J must be positive");
    c.chain.Jz = r.number("Jz", 0.0);
    if (r.has("junction_J")) c.chain.junction_J = r.number("junction_J", 0.0);

    c.prep.kind = detail::parse_prep_kind(r.text("prep", "ground"), r.path("prep"));
    if (r.has("prep_bits")) {
        const auto& b = r.raw("prep_bits");
        require(b.is_array(), r.path("prep_bits"), "expected an array of 0/1");
        for (std::size_t i = 0; i < b.size(); ++i) {
            const auto p = r.path("prep_bits") + "[" + std::to_string(i) + "]";
            require(b[i].is_number_integer(), p, "expected 0 or 1");
            const auto v = b[i].get<std::int64_t>();
            require(v == 0 || v == 1, p, "expected 0 or 1");
            c.prep.bits.push_back(static_cast<int>(v));
        }
    }
    if (c.prep.kind == SystemPrep::Kind::ExplicitBits)
        require(c.prep.bits.size() == static_cast<std::size_t>(c.chain.N), r.path("prep_bits"),
                "needs exactly N entries for prep 'bits'");
    else
        require(c.prep.bits.empty(), r.path("prep_bits"), "only allowed with prep 'bits'");

    const double J = c.chain.J;
    const auto def_window = AnalysisWindow::averaged(c.chain.N, J);
    c.window.tau1 = r.number("tau1", def_window.tau1);
    c.window.tau2 = r.number("tau2", def_window.tau2);
    c.window.T = r.number("T", def_window.T);
    require(c.window.tau1 > 0.0, r.path("tau1"), "must be positive");
    require(c.window.tau2 > c.window.tau1, r.path("tau2"), "must exceed tau1");
    require(c.window.T >= c.window.tau2, r.path("T"), "must be at least tau2");

    auto& e = c.evolution;
    e.dt = r.number("dt", 0.1);
    require(e.dt > 0.0, r.path("dt"), "must be positive");
    // Default: the window end rounded up to a whole step.
    e.t_max = r.number("t_max", std::ceil(c.window.T / e.dt - 1e-9) * e.dt);
    require(e.t_max >= e.dt, r.path("t_max"), "must be at least dt");
    require(std::abs(static_cast<double>(e.total_steps()) * e.dt - e.t_max) <= 1e-9 * e.t_max, r.path("t_max"),
            "must be a whole number of time steps");
    require(c.window.T <= e.t_max + 1e-9, r.path("T"), "analysis window ends after t_max");
    e.max_D = static_cast<Index>(detail::checked_int(r.integer("max_D", 128), r.path("max_D"), 1));
    e.gate_max_D = static_cast<Index>(detail::checked_int(r.integer("gate_max_D", 0), r.path("gate_max_D"), 0));
    e.weight_tol = r.number("weight_tol", 1e-12);
    require(e.weight_tol >= 0.0, r.path("weight_tol"), "must be non-negative");
    e.compress_every = detail::checked_int(r.integer("compress_every", 1), r.path("compress_every"), 0);
    e.compress_max_sweeps = detail::checked_int(r.integer("compress_max_sweeps", 6), r.path("compress_max_sweeps"), 1);
    e.compress_tol = r.number("compress_tol", 1e-12);
    require(e.compress_tol >= 0.0, r.path("compress_tol"), "must be non-negative");
    e.measurement_stride = detail::checked_int(r.integer("measurement_stride", 1), r.path("measurement_stride"), 1);
    e.checkpoint_stride = detail::checked_int(r.integer("checkpoint_stride", 0), r.path("checkpoint_stride"), 0);
    e.alarm_factor = r.number("alarm_factor", 100.0);
    require(e.alarm_factor > 0.0, r.path("alarm_factor"), "must be positive");
    e.compress_alarm = r.number("compress_alarm", 1e-4);
    require(e.compress_alarm >= 0.0, r.path("compress_alarm"), "must be non-negative");
    c.scheme = detail::parse_scheme(r.text("scheme", "suzuki5"), r.path("scheme"));

    c.decay_t0 = r.number("decay_t0", detail::default_decay_start(c.window, J));
    require(c.decay_t0 > 0.0 && c.decay_t0 < c.window.T, r.path("decay_t0"), "must lie in (0, T)");
    c.revival_eps = r.number("revival_eps", kRevivalThreshold);
    require(c.revival_eps >= 0.0, r.path("revival_eps"), "must be non-negative");
    c.alpha_tol = r.number("alpha_tol", 0.1);
    require(c.alpha_tol >= 0.0, r.path("alpha_tol"), "must be non-negative");

    c.dmrg.max_D = static_cast<Index>(detail::checked_int(r.integer("dmrg_max_D", 64), r.path("dmrg_max_D"), 1));
    c.dmrg.max_sweeps = detail::checked_int(r.integer("dmrg_max_sweeps", 30), r.path("dmrg_max_sweeps"), 1);
    c.dmrg.energy_tol = r.number("dmrg_energy_tol", 1e-10);
    require(c.dmrg.energy_tol > 0.0, r.path("dmrg_energy_tol"), "must be positive");

    const auto engine = r.text("engine", "mps");
    require(engine == "mps" || engine == "oracle", r.path("engine"), "expected 'mps' or 'oracle'");
    c.engine = engine == "mps" ? Engine::Mps : Engine::Oracle;
    c.output_dir = r.text("output_dir", "out");
    c.label = r.text("label", "run");
    require(!c.label.empty() && c.label.find('/') == std::string::npos, r.path("label"),
            "must be a non-empty name without '/'");
    if (r.has("seed")) {
        const auto& s = r.raw("seed");
        require(s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0), r.path("seed"),
                "expected a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }

    r.reject_unknown();
    // Backstop for anything the key checks above missed.
    try {
        c.chain.validate();
        c.evolution.validate();
        c.window.validate();
    } catch (const ArgumentError& err) {
        throw ParseError(prefix, err.what());
    }
    return c;
}

inline Json to_json(const RunConfig& c) {
    Json j;
    j["N"] = c.chain.N;
    j["N_b"] = c.chain.N_b;
    j["J"] = c.chain.J;
    j["Jz"] = c.chain.Jz;
    j["junction_J"] = c.chain.junction_J ? Json(*c.chain.junction_J) : Json(nullptr);
    j["prep"] = to_string(c.prep.kind);
    j["prep_bits"] = c.prep.bits;
    j["dt"] = c.evolution.dt;
    j["t_max"] = c.evolution.t_max;
    j["max_D"] = c.evolution.max_D;
    j["gate_max_D"] = c.evolution.gate_max_D;
    j["weight_tol"] = c.evolution.weight_tol;
    j["compress_every"] = c.evolution.compress_every;
    j["compress_max_sweeps"] = c.evolution.compress_max_sweeps;
    j["compress_tol"] = c.evolution.compress_tol;
    j["measurement_stride"] = c.evolution.measurement_stride;
    j["checkpoint_stride"] = c.evolution.checkpoint_stride;
    j["alarm_factor"] = c.evolution.alarm_factor;
    j["compress_alarm"] = c.evolution.compress_alarm;
    j["scheme"] = to_string(c.scheme);
    j["tau1"] = c.window.tau1;
    j["tau2"] = c.window.tau2;
    j["T"] = c.window.T;
    j["decay_t0"] = c.decay_t0;
    j["revival_eps"] = c.revival_eps;
    j["alpha_tol"] = c.alpha_tol;
    j["dmrg_max_D"] = c.dmrg.max_D;
    j["dmrg_max_sweeps"] = c.dmrg.max_sweeps;
    j["dmrg_energy_tol"] = c.dmrg.energy_tol;
    j["engine"] = to_string(c.engine);
    j["output_dir"] = c.output_dir;
    j["label"] = c.label;
    j["seed"] = c.seed;
    return j;
}

// Keys a sweep controls per point; they may not appear in the base.
inline const std::vector<std::string>& sweep_axis_keys() {
    static const std::vector<std::string> k{"N", "N_b", "Jz", "prep", "prep_bits", "output_dir", "label"};
    return k;
}

inline std::string format_jz(double jz) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", jz);
    return buf;
}

inline std::vector<SweepPoint> sweep_points(const SweepConfig& s) {
    std::vector<SweepPoint> pts;
    for (const auto& prep : s.preps)
        for (double jz : s.Jz_values)
            for (int n : s.N_values) {
                SweepPoint p;
                p.N = n;
                p.Jz = jz;
                p.prep = prep;
                p.name = "N" + std::to_string(n) + "_Jz" + format_jz(jz) + "_" + to_string(prep.kind);
                Json doc = s.base;
                doc["N"] = n;
                doc["N_b"] = s.lead_rule == LeadRule::Equal ? n : 2 * n;
                doc["Jz"] = jz;
                doc["prep"] = to_string(prep.kind);
                if (!prep.bits.empty()) doc["prep_bits"] = prep.bits;
                doc["output_dir"] = s.output_dir + "/" + s.label + "/points";
                doc["label"] = p.name;
                p.config = parse_run_config(doc, "$.base[" + p.name + "]");
                pts.push_back(std::move(p));
            }
    return pts;
}

inline SweepConfig parse_sweep_config(const Json& doc) {
    using detail::require;
    detail::Reader top(doc, "$");
    SweepConfig s;
    require(top.has("sweep"), "$.sweep", "required key missing");
    detail::Reader r(top.raw("sweep"), "$.sweep");
    if (top.has("base")) {
        s.base = top.raw("base");
        require(s.base.is_object(), "$.base", "expected a JSON object");
        for (const auto& k : sweep_axis_keys())
            require(!s.base.contains(k), "$.base." + k, "set by the sweep, not allowed in the base");
    }
    top.reject_unknown();

    auto list = [&](const std::string& key) -> const Json& {
        require(r.has(key), r.path(key), "required key missing");
        const auto& v = r.raw(key);
        require(v.is_array() && !v.empty(), r.path(key), "expected a non-empty array");
        return v;
    };
    const auto& ns = list("N");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const auto p = r.path("N") + "[" + std::to_string(i) + "]";
        require(ns[i].is_number_integer(), p, "expected an integer");
        s.N_values.push_back(detail::checked_int(ns[i].get<std::int64_t>(), p, 2));
    }
    const auto& jz = list("Jz");
    for (std::size_t i = 0; i < jz.size(); ++i) {
        require(jz[i].is_number(), r.path("Jz") + "[" + std::to_string(i) + "]", "expected a number");
        s.Jz_values.push_back(jz[i].get<double>());
    }
    if (r.has("preps")) {
        const auto& ps = list("preps");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto p = r.path("preps") + "[" + std::to_string(i) + "]";
            require(ps[i].is_string(), p, "expected a preparation name");
            SystemPrep prep;
            prep.kind = detail::parse_prep_kind(ps[i].get<std::string>(), p);
            require(prep.kind != SystemPrep::Kind::ExplicitBits, p, "bit-string preparations cannot be swept");
            s.preps.push_back(prep);
        }
    } else {
        s.preps.push_back(SystemPrep::ground());
    }
    const auto rule = r.text("lead_rule", "N");
    require(rule == "N" || rule == "2N", r.path("lead_rule"), "expected 'N' or '2N'");
    s.lead_rule = rule == "N" ? LeadRule::Equal : LeadRule::Double;
    s.workers = detail::checked_int(r.integer("workers", 1), r.path("workers"), 1, 256);
    s.output_dir = r.text("output_dir", "out");
    s.label = r.text("label", "sweep");
    require(!s.label.empty() && s.label.find('/') == std::string::npos, r.path("label"),
            "must be a non-empty name without '/'");
    r.reject_unknown();
    sweep_points(s);  // validates every generated point
    return s;
}

inline Json to_json(const SweepConfig& s) {
    Json sw;
    sw["N"] = s.N_values;
    sw["Jz"] = s.Jz_values;
    Json preps = Json::array();
    for (const auto& p : s.preps) preps.push_back(to_string(p.kind));
    sw["preps"] = preps;
    sw["lead_rule"] = s.lead_rule == LeadRule::Equal ? "N" : "2N";
    sw["workers"] = s.workers;
    sw["output_dir"] = s.output_dir;
    sw["label"] = s.label;
    Json j;
    j["sweep"] = sw;
    j["base"] = s.base;
    return j;
}

using AnyConfig = std::variant<RunConfig, SweepConfig>;

inline Json parse_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError("$", std::string("invalid JSON: ") + e.what());
    }
}

// A document with a top-level "sweep" key is a sweep, anything else a run.
inline AnyConfig parse_config(const std::string& text) {
    const Json doc = parse_json_text(text);
    if (doc.is_object() && doc.contains("sweep")) return parse_sweep_config(doc);
    return parse_run_config(doc);
}

inline std::string emit(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }
inline std::string emit(const SweepConfig& s) { return to_json(s).dump(2) + "\n"; }

} // namespace xxzb
