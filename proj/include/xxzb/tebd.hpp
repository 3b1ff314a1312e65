#pragma once

// Real-time evolution of an MPS under a Trotter schedule, with per-gate SVD
// truncation, optional periodic variational compression, and observable
// recording.

#include <xxzb/compress.hpp>
#include <xxzb/errors.hpp>
#include <xxzb/model.hpp>
#include <xxzb/mps.hpp>
#include <xxzb/pauli.hpp>
#include <xxzb/trajectory.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace xxzb {

struct EvolutionConfig {
    double dt = 0.1;
    double t_max = 1.0;
    Index max_D = 128;
    Index gate_max_D = 0;  // per-gate SVD cap; 0 means max_D
    double weight_tol = 1e-12;
    int compress_every = 1;  // steps between variational compressions, 0 = never
    int compress_max_sweeps = 6;
    double compress_tol = 1e-12;
    int measurement_stride = 1;
    int checkpoint_stride = 0;
    double alarm_factor = 100.0;
    double compress_alarm = 1e-4;  // per-compression infidelity bound

    bool operator==(const EvolutionConfig&) const = default;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("dt must be positive");
        if (!(t_max >= dt)) throw ArgumentError("t_max must be at least dt");
        if (max_D < 1) throw ArgumentError("max_D must be at least 1");
        if (weight_tol < 0.0) throw ArgumentError("weight_tol must be non-negative");
        if (compress_every < 0) throw ArgumentError("compress_every must be non-negative");
        if (measurement_stride < 1) throw ArgumentError("measurement_stride must be at least 1");
        if (!(compress_alarm >= 0.0)) throw ArgumentError("compress_alarm must be non-negative");
        if (checkpoint_stride < 0) throw ArgumentError("checkpoint_stride must be non-negative");
    }

    Index gate_cap() const { return gate_max_D == 0 ? max_D : std::max(gate_max_D, max_D); }
    Index total_steps() const { return static_cast<Index>(std::llround(t_max / dt)); }
};

struct StepState {
    Index step = 0;
    double time = 0.0;
    double error_budget = 0.0;
    double discarded_weight = 0.0;  // truncation part of error_budget
};

struct EvolutionHooks {
    std::function<void(const StepState&, const MatrixProductState&)> on_measure;
    // Also receives the trajectory recorded so far.
    std::function<void(const StepState&, const MatrixProductState&, const TrajectoryRecord&)> on_checkpoint;
};

struct EvolutionResult {
    TrajectoryRecord record;
    MatrixProductState final_state;
};

// 2J <X_i Y_{i+1} - Y_i X_{i+1}>; positive values move magnetization from
// site i to site i+1.
inline double measure_current(const MatrixProductState& psi, Index bond, double J) {
    if (bond + 1 >= psi.length()) throw ArgumentError("bond " + std::to_string(bond) + " out of range");
    ExpectationCache cache(psi);
    const cplx v = cache.two_site(pauli::x(), pauli::y(), bond) - cache.two_site(pauli::y(), pauli::x(), bond);
    return 2.0 * J * std::real(v);
}

struct Profile {
    std::vector<double> z;
    std::vector<double> q;
    double norm = 0.0;
};

// All <Z_i> and Q_i from one pair of environment sweeps. Uses
// X(x)Y - Y(x)X = 2i (S+ (x) S- - S- (x) S+), so the current is -4 Im<S+ S->.
inline Profile measure_profile(const MatrixProductState& psi, const Couplings& couplings) {
    ExpectationCache cache(psi);
    Profile p;
    p.norm = std::sqrt(cache.tensor_norm_squared()) * std::exp(psi.log_norm_adjust());
    const auto z = pauli::z(), up = pauli::raise(), down = pauli::lower();
    for (Index i = 0; i < psi.length(); ++i) p.z.push_back(std::real(cache.one_site(z, i)));
    for (Index k = 0; k + 1 < psi.length(); ++k) {
        const cplx c = cache.two_site(up, down, k);
        p.q.push_back(2.0 * couplings.at(k).J * (-4.0 * std::imag(c)));
    }
    return p;
}

// Applies one layer of commuting gates, sweeping away from the end nearest
// the current canonical center. Returns the summed discarded weight.
inline double apply_layer(MatrixProductState& psi, const TrotterLayer& layer, Index max_D, double weight_tol) {
    if (layer.gates.empty()) return 0.0;
    const Index first = layer.gates.front().bond, last = layer.gates.back().bond;
    const Index c = psi.ortho_center().value_or(0);
    double w = 0.0;
    if (2 * c <= first + last + 1) {
        for (const auto& g : layer.gates) w += apply_two_site_gate(psi, g.gate, g.bond, max_D, weight_tol);
    } else {
        for (auto it = layer.gates.rbegin(); it != layer.gates.rend(); ++it)
            w += apply_two_site_gate(psi, it->gate, it->bond, max_D, weight_tol);
    }
    return w;
}

inline EvolutionResult evolve(const MatrixProductState& initial, const TrotterSchedule& schedule,
                              const Couplings& couplings, const EvolutionConfig& config, Index junction_bond,
                              const EvolutionHooks& hooks = {}, StepState start = {}) {
    config.validate();
    if (couplings.size() + 1 != initial.length()) throw ArgumentError("couplings and state lengths disagree");
    for (const auto& l : schedule.layers)
        for (const auto& g : l.gates)
            if (g.bond + 1 >= initial.length()) throw ArgumentError("schedule and state lengths disagree");
    if (std::abs(schedule.dt - config.dt) > 1e-15) throw ArgumentError("schedule dt differs from config dt");

    EvolutionResult out;
    auto& rec = out.record;
    rec.length = initial.length();
    rec.junction_bond = junction_bond;
    MatrixProductState psi = initial;
    const Index n_steps = config.total_steps();
    const Index gate_cap = config.gate_cap();
    double discarded = start.discarded_weight;
    double budget = start.error_budget;

    auto record = [&](Index step) {
        const double t = static_cast<double>(step) * config.dt;
        Profile p = measure_profile(psi, couplings);
        rec.append(step, t, std::move(p.z), std::move(p.q), p.norm, psi.max_bond_dimension(), discarded, budget);
        if (hooks.on_measure) hooks.on_measure({step, t, budget, discarded}, psi);
    };

    if (start.step == 0) record(0);
    for (Index step = start.step + 1; step <= n_steps; ++step) {
        const double t = static_cast<double>(step) * config.dt;
        double step_w = 0.0;
        for (const auto& layer : schedule.layers) step_w += apply_layer(psi, layer, gate_cap, config.weight_tol);
        discarded += step_w;
        budget += step_w;
        const Index bond_before = psi.max_bond_dimension();
        if (bond_before >= gate_cap && step_w > config.alarm_factor * config.weight_tol)
            rec.alarms.push_back({step, t, AlarmKind::Truncation, step_w, bond_before});
        if (config.compress_every > 0 && step % static_cast<Index>(config.compress_every) == 0) {
            auto c = variational_compress(psi, config.max_D, config.compress_max_sweeps, config.compress_tol);
            if (c.sweeps > 0 || c.infidelity > 0.0) psi = std::move(c.state);
            budget += c.infidelity;
            rec.compressions.push_back({step, t, c.infidelity, c.sweeps});
            if (c.infidelity > config.compress_alarm)
                rec.alarms.push_back({step, t, AlarmKind::Compression, c.infidelity, bond_before});
        }
        if (step % static_cast<Index>(config.measurement_stride) == 0) record(step);
        if (config.checkpoint_stride > 0 && step % static_cast<Index>(config.checkpoint_stride) == 0 &&
            hooks.on_checkpoint)
            hooks.on_checkpoint({step, t, budget, discarded}, psi, rec);
    }
    out.final_state = std::move(psi);
    return out;
}

enum class ContinuityStencil {
    Central,  // (Z[n+1] - Z[n-1]) / 2h  against  Q[n]
    Simpson,  // same difference against the Simpson average of Q over [n-1, n+1]
};

// d<Z_i>/dt - (Q_{i-1} - Q_i) at interior record points, with Q outside the
// chain taken as zero. The central form carries an O(h^2) stencil error of
// its own; the Simpson form integrates the continuity equation over the two
// intervals and is accurate to O(h^4).
inline std::vector<double> continuity_residual(const TrajectoryRecord& rec, Index site,
                                               ContinuityStencil stencil = ContinuityStencil::Central) {
    if (rec.size() < 3) throw ArgumentError("continuity residual needs at least three time points");
    if (site >= rec.length) throw ArgumentError("site out of range");
    auto net_in = [&](Index n) {
        const double q_in = site > 0 ? rec.q_profile[n][site - 1] : 0.0;
        const double q_out = site + 1 < rec.length ? rec.q_profile[n][site] : 0.0;
        return q_in - q_out;
    };
    std::vector<double> r;
    for (Index n = 1; n + 1 < rec.size(); ++n) {
        const double dzdt = (rec.z_profile[n + 1][site] - rec.z_profile[n - 1][site]) / (rec.times[n + 1] - rec.times[n - 1]);
        const double flow = stencil == ContinuityStencil::Central
                                ? net_in(n)
                                : (net_in(n - 1) + 4.0 * net_in(n) + net_in(n + 1)) / 6.0;
        r.push_back(dzdt - flow);
    }
    return r;
}

inline double max_continuity_residual(const TrajectoryRecord& rec,
                                      ContinuityStencil stencil = ContinuityStencil::Central) {
    double w = 0.0;
    for (Index i = 0; i < rec.length; ++i)
        for (double v : continuity_residual(rec, i, stencil)) w = std::max(w, std::abs(v));
    return w;
}

} // namespace xxzb
