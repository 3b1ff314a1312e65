#pragma once

// Trotter error against the exact oracle as a function of dt.

#include <xxzb/analysis.hpp>
#include <xxzb/errors.hpp>
#include <xxzb/oracle.hpp>
#include <xxzb/prep.hpp>
#include <xxzb/tebd.hpp>

#include <cmath>
#include <vector>

namespace xxzb {

struct ConvergenceRow {
    double dt = 0.0;
    double max_deviation = 0.0;  // over all <Z_i>, Q_i and initial states
};

struct ConvergenceTable {
    SplittingScheme scheme = SplittingScheme::Suzuki5;
    double t_final = 0.0;
    std::vector<ConvergenceRow> rows;
    double slope = 0.0;     // d log(deviation) / d log(dt)
    bool at_floor = false;  // every deviation below 1e-12; slope is meaningless
};

constexpr Index kConvergenceMaxSites = 12;
constexpr double kConvergenceFloor = 1e-12;

// Untruncated MPS evolution of each initial state to t_final for every dt,
// compared with the exact state at t_final. t_final must be a multiple of
// each dt.
inline ConvergenceTable trotter_convergence_probe(const Couplings& couplings,
                                                  const std::vector<MatrixProductState>& initial,
                                                  const std::vector<double>& dts, double t_final = 1.0,
                                                  SplittingScheme scheme = SplittingScheme::Suzuki5) {
    const Index L = couplings.size() + 1;
    if (L > kConvergenceMaxSites)
        throw CapacityError("convergence probe limited to " + std::to_string(kConvergenceMaxSites) + " sites");
    if (initial.empty() || dts.empty()) throw ArgumentError("convergence probe needs initial states and time steps");
    ConvergenceTable table;
    table.scheme = scheme;
    table.t_final = t_final;

    std::vector<TrajectoryRecord> exact;
    const std::vector<double> grid{0.0, t_final};
    for (const auto& psi : initial) {
        if (psi.length() != L) throw ArgumentError("initial state length does not match couplings");
        exact.push_back(oracle::exact_evolve(couplings, oracle::from_mps(psi), grid, 0, 1e-13));
    }

    for (double dt : dts) {
        EvolutionConfig cfg;
        cfg.dt = dt;
        cfg.t_max = t_final;
        cfg.max_D = Index{1} << (L / 2);
        cfg.weight_tol = 0.0;
        cfg.compress_every = 0;
        cfg.measurement_stride = static_cast<int>(cfg.total_steps());
        if (std::abs(cfg.total_steps() * dt - t_final) > 1e-9 * t_final)
            throw ArgumentError("t_final must be a multiple of every dt");
        const auto sched = trotter_schedule(couplings, dt, scheme);
        ConvergenceRow row{dt, 0.0};
        for (std::size_t p = 0; p < initial.size(); ++p) {
            const auto r = evolve(initial[p], sched, couplings, cfg, 0);
            const auto& z = r.record.z_profile.back();
            const auto& q = r.record.q_profile.back();
            for (Index i = 0; i < L; ++i)
                row.max_deviation = std::max(row.max_deviation, std::abs(z[i] - exact[p].z_profile.back()[i]));
            for (Index b = 0; b + 1 < L; ++b)
                row.max_deviation = std::max(row.max_deviation, std::abs(q[b] - exact[p].q_profile.back()[b]));
        }
        table.rows.push_back(row);
    }

    table.at_floor = std::all_of(table.rows.begin(), table.rows.end(),
                                 [](const ConvergenceRow& r) { return r.max_deviation < kConvergenceFloor; });
    if (!table.at_floor && table.rows.size() >= 2) {
        std::vector<double> lx, ly;
        for (const auto& r : table.rows) {
            lx.push_back(std::log(r.dt));
            ly.push_back(std::log(std::max(r.max_deviation, 1e-300)));
        }
        table.slope = detail::fit_line(lx, ly).slope;
    }
    return table;
}

inline ConvergenceTable trotter_convergence_probe(const ChainSpec& spec, const std::vector<SystemPrep>& preps,
                                                  const std::vector<double>& dts, double t_final = 1.0,
                                                  SplittingScheme scheme = SplittingScheme::Suzuki5) {
    spec.validate();
    if (spec.length() > kConvergenceMaxSites)
        throw CapacityError("convergence probe limited to " + std::to_string(kConvergenceMaxSites) + " sites");
    std::vector<MatrixProductState> initial;
    for (const auto& p : preps) initial.push_back(initial_state(spec, p));
    return trotter_convergence_probe(spec.couplings(), initial, dts, t_final, scheme);
}

} // namespace xxzb
