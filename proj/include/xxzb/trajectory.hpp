#pragma once

// Time series produced by both the MPS engine and the exact oracle.

#include <xxzb/tensor.hpp>

#include <string>
#include <vector>

namespace xxzb {

struct CompressionEvent {
    Index step = 0;
    double time = 0.0;
    double infidelity = 0.0;
    int sweeps = 0;
};

enum class AlarmKind {
    Truncation,   // a step discarded weight while the bond cap was saturated
    Compression,  // a variational compression exceeded its infidelity bound
};

inline std::string to_string(AlarmKind k) { return k == AlarmKind::Truncation ? "truncation" : "compression"; }

struct AccuracyAlarm {
    Index step = 0;
    double time = 0.0;
    AlarmKind kind = AlarmKind::Truncation;
    double value = 0.0;  // step discarded weight or compression infidelity
    Index max_bond_dim = 0;
};

struct TrajectoryRecord {
    Index length = 0;         // sites
    Index junction_bond = 0;  // bond between the left lead and the system
    std::vector<Index> steps;
    std::vector<double> times;                     // units of 1/J
    std::vector<std::vector<double>> z_profile;    // [time][site]
    std::vector<std::vector<double>> q_profile;    // [time][bond]
    std::vector<double> junction_current;
    std::vector<double> total_magnetization;
    std::vector<double> norm;                      // ||psi(t)||
    std::vector<Index> max_bond_dim;
    std::vector<double> cumulative_discarded_weight;
    std::vector<double> error_budget;              // discarded weight + compression infidelity
    std::vector<CompressionEvent> compressions;
    std::vector<AccuracyAlarm> alarms;

    Index size() const { return times.size(); }

    void append(Index step, double t, std::vector<double> z, std::vector<double> q, double norm_value, Index bond_dim,
                double discarded, double budget) {
        double m = 0.0;
        for (double v : z) m += v;
        steps.push_back(step);
        times.push_back(t);
        junction_current.push_back(junction_bond < q.size() ? q[junction_bond] : 0.0);
        z_profile.push_back(std::move(z));
        q_profile.push_back(std::move(q));
        total_magnetization.push_back(m);
        norm.push_back(norm_value);
        max_bond_dim.push_back(bond_dim);
        cumulative_discarded_weight.push_back(discarded);
        error_budget.push_back(budget);
    }

    double max_magnetization_drift() const {
        double d = 0.0;
        for (double m : total_magnetization) d = std::max(d, std::abs(m - total_magnetization.front()));
        return d;
    }
};

} // namespace xxzb
