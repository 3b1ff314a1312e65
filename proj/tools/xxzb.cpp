// xxzb: command-line front end for battery-driven XXZ transport runs.
//
// Exit codes: 0 success, 2 config error, 3 capacity error, 4 I/O error,
// 1 anything else.

#include <xxzb/run.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace xxzb;

namespace {

// Every run-config key is also a flag; values are read as JSON when they
// parse, otherwise as strings.
const std::vector<std::string> kConfigKeys{
    "N",           "N_b",        "J",           "Jz",           "junction_J",  "prep",
    "prep_bits",   "dt",         "t_max",       "max_D",        "gate_max_D",  "weight_tol",
    "compress_every", "compress_max_sweeps", "compress_tol", "measurement_stride", "checkpoint_stride",
    "alarm_factor", "compress_alarm", "scheme",    "tau1",        "tau2",         "T",           "decay_t0",
    "revival_eps", "alpha_tol",  "dmrg_max_D",  "dmrg_max_sweeps", "dmrg_energy_tol", "engine",
    "output_dir",  "label",      "seed"};

struct RunFlags {
    std::string config_path;
    std::map<std::string, std::string> values;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
    app->add_option("-c,--config", f.config_path, "JSON config file (flags override its keys)");
    for (const auto& k : kConfigKeys)
        app->add_option_function<std::string>(
            "--" + k, [&f, k](const std::string& v) { f.values[k] = v; }, "config key " + k);
}

Json overlay(const RunFlags& f) {
    Json doc = Json::object();
    if (!f.config_path.empty()) doc = parse_json_text(read_file(f.config_path));
    if (!doc.is_object()) throw ParseError("$", "config file must hold a JSON object");
    for (const auto& [k, v] : f.values) {
        try {
            doc[k] = Json::parse(v);
        } catch (const Json::parse_error&) {
            doc[k] = v;
        }
    }
    return doc;
}

RunConfig load_run(const RunFlags& f) { return parse_run_config(overlay(f)); }

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

int run_cli(int argc, char** argv) {
    CLI::App app{"Battery-driven XXZ chain transport: MPS time evolution, exact reference and analysis"};
    app.require_subcommand(1);

    RunFlags gs_flags, ev_flags, or_flags, fi_flags;
    bool no_exact = false;
    auto* gs = app.add_subcommand("groundstate", "DMRG ground state of the isolated system chain");
    add_run_flags(gs, gs_flags);
    gs->add_flag("--no-exact", no_exact, "skip the exact-diagonalization comparison");

    std::string resume;
    auto* ev = app.add_subcommand("evolve", "time evolution (engine from config, MPS by default)");
    add_run_flags(ev, ev_flags);
    ev->add_option("--resume", resume, "continue from this checkpoint (run directory from the config)");

    auto* orc = app.add_subcommand("oracle", "time evolution with the exact engine");
    add_run_flags(orc, or_flags);

    std::string analyze_dir;
    auto* an = app.add_subcommand("analyze", "recompute analysis.json from a run directory");
    an->add_option("dir", analyze_dir, "run directory")->required();

    auto* fi = app.add_subcommand("fidelity", "GHZ versus ground-state fidelity of the system");
    add_run_flags(fi, fi_flags);

    std::string sweep_path;
    int sweep_workers = 0;
    auto* sw = app.add_subcommand("sweep", "parameter sweep over N, Jz and preparation");
    sw->add_option("-c,--config", sweep_path, "JSON sweep config")->required();
    sw->add_option("--workers", sweep_workers, "parallel points (XXZB_WORKERS overrides)");

    std::string ck_path;
    auto* ck = app.add_subcommand("checkpoint-info", "print the header of a checkpoint file");
    ck->add_option("file", ck_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*gs) {
        print(run_groundstate(load_run(gs_flags), !no_exact));
    } else if (*ev) {
        const auto c = load_run(ev_flags);
        std::optional<fs::path> r;
        if (!resume.empty()) r = resume;
        print(run(c, r).analysis);
    } else if (*orc) {
        auto doc = overlay(or_flags);
        doc["engine"] = "oracle";
        print(run(parse_run_config(doc)).analysis);
    } else if (*an) {
        print(analyze_directory(analyze_dir));
    } else if (*fi) {
        print(run_fidelity(load_run(fi_flags)).report);
    } else if (*sw) {
        auto doc = parse_json_text(read_file(sweep_path));
        if (sweep_workers > 0 && doc.is_object() && doc.contains("sweep")) doc["sweep"]["workers"] = sweep_workers;
        const auto out = run_sweep(parse_sweep_config(doc));
        print(out.aggregate);
        if (!out.failed.empty()) std::cerr << out.failed.size() << " sweep point(s) failed\n";
    } else if (*ck) {
        const auto c = read_checkpoint(ck_path);
        Json bonds = Json::array();
        for (Index i = 0; i + 1 < c.state.length(); ++i) bonds.push_back(c.state.site(i).extent(2));
        const auto center = c.state.ortho_center();
        print({{"version", kCheckpointVersion},
               {"sites", c.state.length()},
               {"bond_dims", bonds},
               {"max_bond_dim", c.state.max_bond_dimension()},
               {"time", c.at.time},
               {"step", c.at.step},
               {"error_budget", c.at.error_budget},
               {"discarded_weight", c.at.discarded_weight},
               {"canonical_center", center ? Json(*center) : Json(nullptr)},
               {"crc", "ok"}});
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const PreparationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
