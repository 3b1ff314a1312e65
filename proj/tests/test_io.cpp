#include <xxzb/run.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <unistd.h>

using namespace xxzb;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("xxzb_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig small_run(const fs::path& out, const std::string& extra = "") {
    std::string doc = R"({"N": 4, "N_b": 4, "Jz": 0.5, "prep": "ground", "t_max": 2.0, "max_D": 16, "output_dir": ")" +
                      out.string() + "\"" + extra + "}";
    return parse_run_config(parse_json_text(doc));
}

std::string expect_parse_error(const std::string& doc) {
    try {
        parse_config(doc);
    } catch (const ParseError& e) {
        return e.what();
    }
    ADD_FAILURE() << "accepted: " << doc;
    return "";
}

// analysis.json minus the run label.
std::string analysis_body(const fs::path& dir) {
    auto j = Json::parse(read_file(dir / "analysis.json"));
    j.erase("label");
    return j.dump();
}

int cli(const std::string& args) {
    const int st = std::system((std::string(XXZB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

} // namespace

TEST(Config, MinimalMaterializesDefaults) {
    const auto c = std::get<RunConfig>(parse_config(R"({"N": 4, "N_b": 4, "Jz": 0.5, "prep": "ground"})"));
    EXPECT_EQ(c.evolution.dt, 0.1);
    EXPECT_EQ(c.evolution.max_D, 128u);
    EXPECT_EQ(c.engine, Engine::Mps);
    EXPECT_EQ(c.scheme, SplittingScheme::Suzuki5);
    EXPECT_DOUBLE_EQ(c.window.tau1, 0.4);
    EXPECT_DOUBLE_EQ(c.window.tau2, 1.4);
    EXPECT_DOUBLE_EQ(c.window.T, 2.0);
    EXPECT_DOUBLE_EQ(c.evolution.t_max, 2.0);
    const auto j = to_json(c);
    EXPECT_EQ(j.at("dt"), 0.1);
    EXPECT_EQ(j.at("max_D"), 128);
    EXPECT_EQ(j.size(), 33u);
}

TEST(Config, RejectionsCarryKeyPath) {
    EXPECT_NE(expect_parse_error(R"({"N": 4, "N_b": 3})").find("$.N_b: lead length must satisfy N_b >= N"),
              std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4, "dtt": 0.1})").find("$.dtt: unknown key"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4, "dt": "fast"})").find("$.dt"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4.5})").find("$.N"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"Jz": 1})").find("$.N: required"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4, "prep": "bits", "prep_bits": [1, 0]})").find("$.prep_bits"),
              std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4, "dt": 0.3, "t_max": 1.0})").find("$.t_max"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4, "T": 5.0, "t_max": 2.0})").find("$.T"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"N": 4, "engine": "gpu"})").find("$.engine"), std::string::npos);
    EXPECT_NE(expect_parse_error("{\"N\": 4,").find("invalid JSON"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"sweep": {"N": [], "Jz": [1]}})").find("$.sweep.N"), std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"sweep": {"N": [4], "Jz": [1]}, "base": {"N": 4}})").find("$.base.N"),
              std::string::npos);
    EXPECT_NE(expect_parse_error(R"({"sweep": {"N": [4], "Jz": [1]}, "base": {"dt": -1}})").find("dt"),
              std::string::npos);
}

TEST(Config, RoundTripOnRandomConfigs) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n(2, 12), extra(0, 6), pick(0, 3), d(1, 256);
    std::uniform_real_distribution<double> jz(-2.0, 2.0), u(0.0, 1.0);
    const char* preps[] = {"ground", "ghz", "neel", "bits"};
    const char* schemes[] = {"suzuki5", "forest_ruth", "second_order", "suzuki5"};
    for (int trial = 0; trial < 200; ++trial) {
        Json doc;
        const int N = n(rng);
        doc["N"] = N;
        doc["N_b"] = N + extra(rng);
        doc["Jz"] = jz(rng);
        doc["J"] = 0.5 + u(rng);
        const std::string prep = preps[pick(rng)];
        doc["prep"] = prep;
        if (prep == "bits") {
            Json bits = Json::array();
            for (int i = 0; i < N; ++i) bits.push_back(static_cast<int>(rng() & 1u));
            doc["prep_bits"] = bits;
        }
        if (u(rng) < 0.5) doc["junction_J"] = u(rng);
        doc["max_D"] = d(rng);
        doc["scheme"] = schemes[pick(rng)];
        doc["weight_tol"] = u(rng) * 1e-9;
        doc["seed"] = rng() >> 1;
        doc["engine"] = u(rng) < 0.5 ? "mps" : "oracle";
        const auto c = parse_run_config(doc);
        const auto text = emit(c);
        const auto back = std::get<RunConfig>(parse_config(text));
        EXPECT_EQ(back, c);
        EXPECT_EQ(emit(back), text);
    }
}

TEST(Config, SweepCardinalityAndLeadRule) {
    const auto s = std::get<SweepConfig>(parse_config(
        R"({"sweep": {"N": [8, 12, 16], "Jz": [0.5, 1.0, 1.5], "lead_rule": "2N"}, "base": {"max_D": 32}})"));
    const auto pts = sweep_points(s);
    ASSERT_EQ(pts.size(), 9u);
    for (const auto& p : pts) {
        EXPECT_EQ(p.config.chain.N_b, 2 * p.N);
        EXPECT_EQ(p.config.evolution.max_D, 32u);
        EXPECT_DOUBLE_EQ(p.config.window.T, 0.5 * p.N);
    }
    EXPECT_EQ(std::get<SweepConfig>(parse_config(emit(s))), s);
}

TEST(Csv, SchemaFromOracleRun) {
    const auto dir = scratch("csv");
    auto c = parse_run_config(parse_json_text(R"({"N": 2, "N_b": 2, "Jz": 0.3, "t_max": 1.0, "engine": "oracle",
        "output_dir": ")" + dir.string() + "\"}"));
    run(c);
    const auto text = read_file(dir / "run" / "trajectory.csv");
    const auto header = text.substr(0, text.find('\n'));
    EXPECT_EQ(header, "t,z_1,z_2,z_3,z_4,z_5,z_6,q_1,q_2,q_3,q_4,q_5,max_D,err_budget");
    const auto csv = parse_trajectory_csv(text);
    EXPECT_EQ(csv.length, 6u);
    ASSERT_EQ(csv.times.size(), 11u);
    const std::vector<double> z0{1, 1, 0, 0, -1, -1};
    for (Index i = 0; i < 6; ++i) EXPECT_NEAR(csv.z[0][i], z0[i], 1e-12);
    // %.17g round-trips every double exactly.
    const auto rec = load_record(dir / "run");
    EXPECT_EQ(trajectory_csv(rec), text);
    EXPECT_THROW(parse_trajectory_csv("t,z_1\n0,1\n"), IoError);
    EXPECT_THROW(parse_trajectory_csv(csv_header(2) + "\n0,1,1\n"), IoError);
    fs::remove_all(dir);
}

TEST(Run, RepeatRunsAreByteIdentical) {
    const auto dir = scratch("repeat");
    for (const char* label : {"a", "b"}) {
        auto c = small_run(dir, ", \"label\": \"" + std::string(label) + "\", \"gate_max_D\": 32");
        run(c);
    }
    for (const char* f : {"trajectory.csv", "events.json"})
        EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
    EXPECT_EQ(analysis_body(dir / "a"), analysis_body(dir / "b"));
    fs::remove_all(dir);
}

TEST(Run, ResumeMatchesUninterruptedRun) {
    const auto dir = scratch("resume");
    // Compression is active (gate cap above max_D) so the budget is nontrivial.
    const std::string knobs = R"(, "max_D": 6, "gate_max_D": 12, "checkpoint_stride": 4)";
    const auto full = small_run(dir, R"(, "label": "full")" + knobs);
    run(full);
    const auto golden = read_file(dir / "full" / "trajectory.csv");

    // Interrupted run: same settings, stopped at t = 0.8.
    auto cut = small_run(dir, R"(, "label": "cut", "t_max": 0.8, "T": 0.8, "tau2": 0.5)" + knobs);
    run(cut);
    auto cont = full;
    cont.label = "cut";
    run(cont, dir / "cut" / "checkpoints" / "step_00000008.mpsk");
    EXPECT_EQ(read_file(dir / "cut" / "trajectory.csv"), golden);
    EXPECT_EQ(read_file(dir / "cut" / "events.json"), read_file(dir / "full" / "events.json"));
    EXPECT_EQ(analysis_body(dir / "cut"), analysis_body(dir / "full"));

    // Resuming inside a finished run discards the rows after the checkpoint.
    run(full, dir / "full" / "checkpoints" / "step_00000012.mpsk");
    EXPECT_EQ(read_file(dir / "full" / "trajectory.csv"), golden);
    fs::remove_all(dir);
}

TEST(Checkpoint, RoundTripAndLayout) {
    auto psi = from_product_state(std::vector<int>{1, 0, 1, 1, 0});
    const auto g = hermitian_gate_exponential(bond_hamiltonian(BondCoupling{1.0, 0.4}), cplx(0.0, -0.3));
    for (Index b = 0; b < 4; ++b) apply_two_site_gate(psi, g, b, 8, 0.0);
    const StepState at{17, 1.7, 3.5e-9, 2.5e-9};
    const auto bytes = encode_checkpoint(psi, at);
    EXPECT_EQ(bytes.substr(0, 4), "MPSK");
    EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
    std::size_t values = 0;
    for (const auto& s : psi.sites()) values += s.size();
    EXPECT_EQ(bytes.size(), 4 + 4 + 8 + 24 * psi.length() + 16 * values + 48 + 4);
    const auto back = decode_checkpoint(bytes);
    ASSERT_EQ(back.state.length(), psi.length());
    for (Index i = 0; i < psi.length(); ++i) EXPECT_EQ(back.state.site(i), psi.site(i));
    EXPECT_EQ(back.state.ortho_center(), psi.ortho_center());
    EXPECT_EQ(back.at.step, 17u);
    EXPECT_EQ(back.at.time, 1.7);
    EXPECT_EQ(back.at.error_budget, 3.5e-9);
    EXPECT_EQ(back.at.discarded_weight, 2.5e-9);
    EXPECT_EQ(encode_checkpoint(back.state, back.at), bytes);
}

TEST(Checkpoint, CorruptionDetected) {
    const auto psi = ghz_state(4);
    const auto bytes = encode_checkpoint(psi, {3, 0.3, 0.0, 0.0});
    std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto bad = bytes;
        bad[pos(rng)] ^= static_cast<char>(1 << (trial % 8));
        EXPECT_THROW(decode_checkpoint(bad), IoError);
    }
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 5)), IoError);
    EXPECT_THROW(decode_checkpoint("MPSK"), IoError);
    EXPECT_THROW(read_checkpoint("/nonexistent/x.mpsk"), IoError);
}

TEST(Sweep, AggregatesAndRecordsFailures) {
    const auto dir = scratch("sweep");
    // N = 3 has no zero-magnetization ground state, so those points fail.
    const std::string doc = R"({"sweep": {"N": [2, 3, 4], "Jz": [0.5, 1.5], "workers": 1, "output_dir": ")" +
                            dir.string() + R"(", "label": "s1"}, "base": {"max_D": 16}})";
    const auto one = run_sweep(parse_sweep_config(parse_json_text(doc)));
    EXPECT_EQ(one.aggregate["points"].size(), 6u);
    EXPECT_EQ(one.aggregate["fits"].size(), 2u);
    EXPECT_EQ(one.failed.size(), 2u);
    EXPECT_EQ(one.aggregate["failed"].size(), 2u);
    // Two sizes survive per Jz, too few for a fit; the row records why.
    EXPECT_TRUE(one.aggregate["fits"][0].contains("error"));
    EXPECT_TRUE(fs::exists(dir / "s1" / "points" / "N4_Jz1.5_ground" / "trajectory.csv"));
    EXPECT_FALSE(fs::exists(dir / "s1" / "points" / ".N4_Jz1.5_ground.partial"));
    EXPECT_TRUE(fs::exists(dir / "s1" / "config.json"));

    ::setenv("XXZB_WORKERS", "3", 1);
    auto s2 = parse_sweep_config(parse_json_text(doc));
    EXPECT_EQ(sweep_worker_count(s2), 3);
    const auto two = run_sweep(s2);
    ::unsetenv("XXZB_WORKERS");
    EXPECT_EQ(two.aggregate.dump(), one.aggregate.dump());
    fs::remove_all(dir);
}

TEST(Sweep, SinglePointMatchesRun) {
    const auto dir = scratch("sweep1");
    const auto s = parse_sweep_config(parse_json_text(R"({"sweep": {"N": [4], "Jz": [0.5], "output_dir": ")" +
                                                      dir.string() + R"(", "label": "one"}, "base": {"max_D": 16}})"));
    const auto out = run_sweep(s);
    ASSERT_EQ(out.aggregate["points"].size(), 1u);
    ASSERT_EQ(out.aggregate["fits"].size(), 1u);
    auto c = small_run(dir, R"(, "label": "direct")");
    const auto direct = run(c);
    EXPECT_EQ(out.aggregate["points"][0]["quasi_steady_current"].get<double>(),
              direct.analysis["quasi_steady_current"].get<double>());
    EXPECT_EQ(read_file(dir / "one" / "points" / "N4_Jz0.5_ground" / "trajectory.csv"),
              read_file(dir / "direct" / "trajectory.csv"));
    fs::remove_all(dir);
}

TEST(Run, AlarmsRecordedWithoutFailing) {
    const auto dir = scratch("alarm");
    auto c = small_run(dir, R"(, "max_D": 2, "prep": "ghz", "t_max": 1.0, "T": 1.0, "tau2": 0.5, "tau1": 0.2)");
    const auto out = run(c);
    EXPECT_GT(out.analysis["alarm_count"].get<int>(), 0);
    EXPECT_EQ(out.analysis["alarms"].size(), out.analysis["alarm_count"].get<std::size_t>());
    EXPECT_EQ(cli("evolve -c " + (dir / "run" / "config.json").string()), 0);
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    const auto out = " --output_dir " + dir.string();
    EXPECT_EQ(cli("oracle --N 2 --N_b 2 --t_max 1" + out), 0);
    EXPECT_EQ(cli("evolve --N 4 --N_b 2" + out), 2);
    EXPECT_EQ(cli("evolve --N 4 --nonsense 1" + out), 2);
    EXPECT_EQ(cli("nosuchcommand"), 2);
    EXPECT_EQ(cli("oracle --N 10 --N_b 10" + out), 3);
    EXPECT_EQ(cli("checkpoint-info " + (dir / "missing.mpsk").string()), 4);
    EXPECT_EQ(cli("evolve -c " + (dir / "missing.json").string()), 4);
    // Flags override the file.
    write_file_atomic(dir / "c.json", R"({"N": 2, "N_b": 2, "t_max": 1.0, "Jz": 0.1, "label": "f"})");
    EXPECT_EQ(cli("evolve -c " + (dir / "c.json").string() + " --Jz 0.7 --checkpoint_stride 5" + out), 0);
    const auto eff = parse_run_config(parse_json_text(read_file(dir / "f" / "config.json")));
    EXPECT_EQ(eff.chain.Jz, 0.7);
    EXPECT_EQ(cli("checkpoint-info " + (dir / "f" / "checkpoints" / "step_00000005.mpsk").string()), 0);
    EXPECT_EQ(cli("analyze " + (dir / "f").string()), 0);
    fs::remove_all(dir);
}
