#pragma once

// Run orchestration: single trajectories (MPS or exact engine), ground-state
// reports, the GHZ-versus-ground fidelity comparison and parameter sweeps.
//
// A run directory <output_dir>/<label>/ holds
//   config.json      effective configuration with every default filled in
//   trajectory.csv   t, z_1..z_L, q_1..q_{L-1}, max_D, err_budget
//   events.json      norms, discarded weights, compressions, alarms
//   analysis.json    derived quantities
//   checkpoints/     step_XXXXXXXX.mpsk (when checkpoint_stride > 0)

#include <xxzb/analysis.hpp>
#include <xxzb/config.hpp>
#include <xxzb/dmrg.hpp>
#include <xxzb/io.hpp>
#include <xxzb/oracle.hpp>
#include <xxzb/prep.hpp>
#include <xxzb/tebd.hpp>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <thread>

namespace xxzb {

inline fs::path run_directory(const RunConfig& c) { return fs::path(c.output_dir) / c.label; }

// ---- analysis report -----------------------------------------------------

inline Json fit_json(const FitResult& f) {
    return {{"model", to_string(f.model)},
            {"amplitude", f.amplitude},
            {"exponent", f.exponent},
            {"residual", f.residual},
            {"n_points", f.n_points},
            {"n_excluded", f.n_excluded}};
}

inline Json analysis_report(const TrajectoryRecord& rec, const RunConfig& c) {
    Json j;
    j["label"] = c.label;
    j["engine"] = to_string(c.engine);
    j["L"] = rec.length;
    j["N"] = c.chain.N;
    j["N_b"] = c.chain.N_b;
    j["J"] = c.chain.J;
    j["Jz"] = c.chain.Jz;
    j["prep"] = to_string(c.prep.kind);
    j["window"] = {{"tau1", c.window.tau1}, {"tau2", c.window.tau2}, {"T", c.window.T}};
    j["quasi_steady_current"] = quasi_steady_current(rec, c.window);
    j["readout_current"] = detail::interpolate(rec.times, rec.junction_current, c.window.T);
    j["current_at_tau1"] = detail::interpolate(rec.times, rec.junction_current, c.window.tau1);
    try {
        const auto d = fit_time_decay(rec, c.decay_t0, c.window.T);
        Json f = fit_json(d);
        f["t_start"] = c.decay_t0;
        f["t_end"] = c.window.T;
        f["label"] = to_string(classify_time_decay(d, c.alpha_tol));
        j["time_decay"] = f;
    } catch (const Error& e) {
        j["time_decay"] = {{"error", e.what()}};
    }

    const auto zi = battery_magnetization(rec, c.chain.N_b);
    const auto zs = summed_lead_magnetization(rec, c.chain.N_b);
    double gap = 0.0;
    for (Index n = 0; n < zi.size(); ++n) gap = std::max(gap, std::abs(zi[n] - zs[n]));
    j["battery"] = {{"final_z_integrated", zi.back()}, {"final_z_summed", zs.back()}, {"max_gap", gap}};

    double norm_drift = 0.0;
    for (double v : rec.norm) norm_drift = std::max(norm_drift, std::abs(v - rec.norm.front()));
    Json cons;
    cons["max_magnetization_drift"] = rec.max_magnetization_drift();
    cons["max_norm_drift"] = norm_drift;
    cons["final_error_budget"] = rec.error_budget.back();
    cons["final_discarded_weight"] = rec.cumulative_discarded_weight.back();
    if (rec.size() >= 3) {
        cons["continuity_residual_central"] = max_continuity_residual(rec, ContinuityStencil::Central);
        cons["continuity_residual_simpson"] = max_continuity_residual(rec, ContinuityStencil::Simpson);
        cons["continuity_stride"] = rec.times[1] - rec.times[0];
    }
    j["conservation"] = cons;

    double max_inf = 0.0;
    for (const auto& e : rec.compressions) max_inf = std::max(max_inf, e.infidelity);
    Index max_bond = 0;
    for (Index d : rec.max_bond_dim) max_bond = std::max(max_bond, d);
    j["compression"] = {{"count", rec.compressions.size()}, {"max_infidelity", max_inf}};
    j["max_bond_dim"] = max_bond;
    j["alarm_count"] = rec.alarms.size();
    j["alarms"] = events_json(rec).at("alarms");
    return j;
}

// ---- single trajectories -------------------------------------------------

// Battery state with the system in its exact ground state (exact engine).
inline oracle::DenseState exact_initial_state(const RunConfig& c) {
    const auto& s = c.chain;
    if (c.prep.kind != SystemPrep::Kind::Ground) return oracle::from_mps(initial_state(s, c.prep));
    oracle::check_sparse_capacity(s.length());
    const auto g = oracle::exact_ground_state(s.system_couplings(), c.seed);
    oracle::DenseState out;
    out.L = s.length();
    out.amplitudes = Vector::Zero(Eigen::Index{1} << out.L);
    const auto nb = static_cast<Eigen::Index>(s.N_b), n = static_cast<Eigen::Index>(s.N);
    const Eigen::Index left = ((Eigen::Index{1} << nb) - 1) << (n + nb);
    for (Eigen::Index i = 0; i < g.state.amplitudes.size(); ++i) out.amplitudes(left | (i << nb)) = g.state.amplitudes(i);
    return out;
}

inline TrajectoryRecord exact_trajectory(const RunConfig& c) {
    const auto& e = c.evolution;
    const Index stride = static_cast<Index>(e.measurement_stride);
    std::vector<double> grid;
    std::vector<Index> steps;
    for (Index s = 0; s <= e.total_steps(); s += stride) {
        grid.push_back(static_cast<double>(s) * e.dt);
        steps.push_back(s);
    }
    oracle::check_sparse_capacity(c.chain.length());
    auto rec = oracle::exact_evolve(c.chain.couplings(), exact_initial_state(c), grid, c.chain.left_junction_bond());
    rec.steps = steps;
    return rec;
}

struct RunOutcome {
    fs::path dir;
    TrajectoryRecord record;
    Json analysis;
};

// Runs into `dir`. With `resume`, continues from that checkpoint using the
// trajectory files already in `dir`.
inline RunOutcome run_in(const RunConfig& c, const fs::path& dir, const std::optional<fs::path>& resume = {}) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_file_atomic(dir / "config.json", emit(c));

    RunOutcome out;
    out.dir = dir;
    if (c.engine == Engine::Oracle) {
        if (resume) throw ArgumentError("the exact engine does not use checkpoints");
        out.record = exact_trajectory(c);
    } else {
        const auto sched = trotter_schedule(c.chain, c.evolution.dt, c.scheme);
        const auto couplings = c.chain.couplings();
        const Index jb = c.chain.left_junction_bond();
        TrajectoryRecord prefix;
        EvolutionHooks hooks;
        const fs::path ckdir = dir / "checkpoints";
        hooks.on_checkpoint = [&](const StepState& at, const MatrixProductState& psi, const TrajectoryRecord& rec) {
            write_checkpoint(ckdir / (checkpoint_name(at.step) + ".mpsk"), psi, at);
            TrajectoryRecord so_far = prefix;
            append_record(so_far, rec);
            so_far.length = rec.length;
            so_far.junction_bond = rec.junction_bond;
            save_record(dir, so_far);
        };
        if (resume) {
            const auto ck = read_checkpoint(*resume);
            if (ck.state.length() != c.chain.length()) throw IoError("checkpoint length does not match the config");
            if (ck.at.step > c.evolution.total_steps()) throw IoError("checkpoint lies beyond t_max");
            prefix = truncate_record(load_record(dir), ck.at.step);
            if (prefix.size() == 0 || prefix.steps.back() + static_cast<Index>(c.evolution.measurement_stride) <=
                                          ck.at.step)
                throw IoError("trajectory files in " + dir.string() + " do not reach the checkpoint step");
            auto r = evolve(ck.state, sched, couplings, c.evolution, jb, hooks, ck.at);
            out.record = prefix;
            append_record(out.record, r.record);
        } else {
            const auto psi0 = initial_state(c.chain, c.prep, nullptr, c.dmrg);
            out.record = evolve(psi0, sched, couplings, c.evolution, jb, hooks).record;
        }
    }
    save_record(dir, out.record);
    out.analysis = analysis_report(out.record, c);
    write_file_atomic(dir / "analysis.json", out.analysis.dump(2) + "\n");
    return out;
}

inline RunOutcome run(const RunConfig& c, const std::optional<fs::path>& resume = {}) {
    return run_in(c, run_directory(c), resume);
}

// Recomputes analysis.json from the files of a finished run.
inline Json analyze_directory(const fs::path& dir) {
    const auto cfg = parse_run_config(parse_json_text(read_file(dir / "config.json")));
    const auto rec = load_record(dir);
    auto j = analysis_report(rec, cfg);
    write_file_atomic(dir / "analysis.json", j.dump(2) + "\n");
    return j;
}

// ---- ground state --------------------------------------------------------

inline Json run_groundstate(const RunConfig& c, bool compare_exact = true) {
    const auto dir = run_directory(c);
    write_file_atomic(dir / "config.json", emit(c));
    const auto g = dmrg_ground_state(c.chain.system_couplings(), c.dmrg);
    Json j;
    j["N"] = c.chain.N;
    j["J"] = c.chain.J;
    j["Jz"] = c.chain.Jz;
    j["energy"] = g.energy;
    j["variance"] = g.variance;
    j["sweeps_used"] = g.sweeps_used;
    j["sweep_energies"] = g.sweep_energies;
    j["total_magnetization"] = g.total_magnetization;
    j["max_bond_dim"] = g.state.max_bond_dimension();
    if (compare_exact && c.chain.N <= 14) {
        const auto ex = oracle::exact_ground_state(c.chain.system_couplings(), c.seed);
        j["exact_energy"] = ex.energy;
        j["abs_error"] = std::abs(ex.energy - g.energy);
    }
    write_file_atomic(dir / "groundstate.json", j.dump(2) + "\n");
    return j;
}

// ---- fidelity witness ----------------------------------------------------

struct FidelityOutcome {
    std::vector<double> times;
    std::vector<double> fidelity;
    std::vector<Revival> revivals;
    Json report;
};

// Evolves the GHZ and ground preparations with identical settings and
// compares the system reduced density matrices at every measurement.
inline FidelityOutcome run_fidelity(const RunConfig& c) {
    if (c.engine != Engine::Mps) throw ArgumentError("the fidelity comparison runs on the MPS engine");
    const auto dir = run_directory(c);
    write_file_atomic(dir / "config.json", emit(c));
    const auto sched = trotter_schedule(c.chain, c.evolution.dt, c.scheme);
    const auto couplings = c.chain.couplings();
    const Index first = c.chain.system_first(), count = static_cast<Index>(c.chain.N);
    if (count > kDefaultRdmCap)
        throw CapacityError("system RDM of " + std::to_string(count) + " sites exceeds the cap of " +
                            std::to_string(kDefaultRdmCap));

    auto trajectory = [&](const SystemPrep& prep, const std::string& sub, std::vector<Matrix>& rdms) {
        EvolutionHooks h;
        h.on_measure = [&](const StepState&, const MatrixProductState& psi) {
            rdms.push_back(reduced_density_matrix(psi, first, count).matrix);
        };
        auto r = evolve(initial_state(c.chain, prep, nullptr, c.dmrg), sched, couplings, c.evolution,
                        c.chain.left_junction_bond(), h);
        save_record(dir / sub, r.record);
        return r.record;
    };
    std::vector<Matrix> rho_ghz, rho_g;
    const auto rec = trajectory(SystemPrep::ghz(), "ghz", rho_ghz);
    trajectory(SystemPrep::ground(), "ground", rho_g);

    FidelityOutcome out;
    out.times = rec.times;
    std::string csv = "t,F\n";
    for (std::size_t n = 0; n < rho_ghz.size(); ++n) {
        out.fidelity.push_back(state_fidelity(rho_ghz[n], rho_g[n]));
        csv += format_double(out.times[n]) + "," + format_double(out.fidelity[n]) + "\n";
    }
    write_file_atomic(dir / "fidelity.csv", csv);
    out.revivals = nonmonotonicity_witness(out.fidelity, out.times, c.revival_eps);

    Json j;
    j["N"] = c.chain.N;
    j["N_b"] = c.chain.N_b;
    j["Jz"] = c.chain.Jz;
    j["F_initial"] = out.fidelity.front();
    j["F_readout"] = detail::interpolate(out.times, out.fidelity, c.window.T);
    j["readout_time"] = c.window.T;
    j["F_min"] = *std::min_element(out.fidelity.begin(), out.fidelity.end());
    j["F_max"] = *std::max_element(out.fidelity.begin(), out.fidelity.end());
    Json rev = Json::array();
    for (const auto& r : out.revivals) rev.push_back({{"index", r.index}, {"time", r.time}, {"increment", r.increment}});
    j["revivals"] = rev;
    out.report = j;
    write_file_atomic(dir / "fidelity.json", j.dump(2) + "\n");
    return out;
}

// ---- sweeps --------------------------------------------------------------

inline int sweep_worker_count(const SweepConfig& s) {
    if (const char* env = std::getenv("XXZB_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 256) return static_cast<int>(v);
        throw ParseError("XXZB_WORKERS", "expected an integer in [1, 256]");
    }
    return s.workers;
}

struct SweepOutcome {
    Json aggregate;
    std::vector<std::string> failed;
};

inline SweepOutcome run_sweep(const SweepConfig& s) {
    const fs::path root = fs::path(s.output_dir) / s.label;
    const fs::path points_dir = root / "points";
    std::error_code ec;
    fs::create_directories(points_dir, ec);
    if (ec) throw IoError("cannot create " + points_dir.string() + ": " + ec.message());
    write_file_atomic(root / "config.json", emit(s));

    const auto pts = sweep_points(s);
    std::vector<std::optional<Json>> results(pts.size());
    std::vector<std::string> errors(pts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            const auto& p = pts[i];
            const fs::path tmp = points_dir / ("." + p.name + ".partial");
            const fs::path final_dir = points_dir / p.name;
            try {
                std::error_code e2;
                fs::remove_all(tmp, e2);
                auto r = run_in(p.config, tmp);
                fs::remove_all(final_dir, e2);
                fs::rename(tmp, final_dir, e2);
                if (e2) throw IoError("cannot rename " + tmp.string() + ": " + e2.message());
                results[i] = std::move(r.analysis);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int n_workers = std::min<int>(sweep_worker_count(s), static_cast<int>(pts.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    SweepOutcome out;
    Json points = Json::array(), failed = Json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        Json row{{"name", p.name}, {"N", p.N}, {"N_b", p.config.chain.N_b}, {"Jz", p.Jz}, {"prep", to_string(p.prep.kind)}};
        if (results[i]) {
            row["status"] = "ok";
            row["quasi_steady_current"] = (*results[i])["quasi_steady_current"];
            row["readout_current"] = (*results[i])["readout_current"];
            row["alarm_count"] = (*results[i])["alarm_count"];
        } else {
            row["status"] = "failed";
            row["error"] = errors[i];
            failed.push_back({{"name", p.name}, {"error", errors[i]}});
            out.failed.push_back(p.name);
        }
        points.push_back(row);
    }

    Json fits = Json::array();
    for (const auto& prep : s.preps)
        for (double jz : s.Jz_values) {
            std::vector<double> ns, qs;
            for (std::size_t i = 0; i < pts.size(); ++i)
                if (pts[i].prep == prep && pts[i].Jz == jz && results[i]) {
                    ns.push_back(pts[i].N);
                    qs.push_back((*results[i])["quasi_steady_current"].get<double>());
                }
            Json f{{"Jz", jz}, {"prep", to_string(prep.kind)}, {"sizes", ns}, {"currents", qs}};
            try {
                const auto fl = apply_current_floor(ns, qs);
                auto pw = fit_power_law(fl.x, fl.y);
                auto ex = fit_exponential(fl.x, fl.y);
                pw.n_excluded = ex.n_excluded = fl.excluded;
                f["power_law"] = fit_json(pw);
                f["exponential"] = fit_json(ex);
                f["regime"] = to_string(classify_regime(pw, ex, pts.front().config.alpha_tol));
            } catch (const Error& e) {
                f["error"] = e.what();
            }
            fits.push_back(f);
        }

    out.aggregate = {{"label", s.label}, {"points", points}, {"fits", fits}, {"failed", failed}};
    write_file_atomic(root / "regime.json", out.aggregate.dump(2) + "\n");
    return out;
}

} // namespace xxzb
