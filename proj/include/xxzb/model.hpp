#pragma once

// XXZ chain with two XX "battery" leads.
//
// Site layout (0-based): [0, N_b) left lead, [N_b, N_b + N) system,
// [N_b + N, N + 2 N_b) right lead. Bond k couples sites k and k+1.

#include <xxzb/errors.hpp>
#include <xxzb/pauli.hpp>
#include <xxzb/tensor.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace xxzb {

struct BondCoupling {
    double J = 1.0;   // hopping: J (XX + YY)
    double Jz = 0.0;  // repulsion: Jz ZZ
    bool operator==(const BondCoupling&) const = default;
};

using Couplings = std::vector<BondCoupling>;

inline Couplings uniform_couplings(Index length, double J, double Jz) {
    if (length < 2) throw ArgumentError("a chain needs at least two sites");
    return Couplings(length - 1, BondCoupling{J, Jz});
}

struct ChainSpec {
    int N = 2;
    int N_b = 2;
    double J = 1.0;
    double Jz = 0.0;
    std::optional<double> junction_J;  // defaults to J

    bool operator==(const ChainSpec&) const = default;

    void validate() const {
        if (N < 2) throw ArgumentError("system length N must be at least 2");
        if (N_b < N) throw ArgumentError("lead length N_b must satisfy N_b >= N (got N_b = " + std::to_string(N_b) +
                                         ", N = " + std::to_string(N) + ")");
        if (!(J > 0.0) || !std::isfinite(J)) throw ArgumentError("hopping J must be positive");
        if (!std::isfinite(Jz)) throw ArgumentError("Jz must be finite");
        if (junction_J && !std::isfinite(*junction_J)) throw ArgumentError("junction_J must be finite");
    }

    Index length() const { return static_cast<Index>(N + 2 * N_b); }
    Index system_first() const { return static_cast<Index>(N_b); }
    Index system_last() const { return static_cast<Index>(N_b + N - 1); }
    Index left_junction_bond() const { return static_cast<Index>(N_b - 1); }
    Index right_junction_bond() const { return static_cast<Index>(N_b + N - 1); }
    double junction_coupling() const { return junction_J.value_or(J); }

    BondCoupling bond_parameters(Index k) const {
        validate();
        if (k + 1 >= length()) throw ArgumentError("bond " + std::to_string(k) + " out of range");
        if (k == left_junction_bond() || k == right_junction_bond()) return {junction_coupling(), 0.0};
        if (k >= system_first() && k < system_last()) return {J, Jz};
        return {J, 0.0};
    }

    Couplings couplings() const {
        Couplings c;
        for (Index k = 0; k + 1 < length(); ++k) c.push_back(bond_parameters(k));
        return c;
    }

    // The isolated system chain, as used for the ground-state preparation.
    Couplings system_couplings() const { return uniform_couplings(static_cast<Index>(N), J, Jz); }
};

inline DenseTensor bond_hamiltonian(const BondCoupling& c) {
    using namespace pauli;
    const Eigen::Matrix4cd h = c.J * (kron(x(), x()) + kron(y(), y())) + c.Jz * kron(z(), z());
    return DenseTensor::from_matrix(h);
}

inline DenseTensor bond_hamiltonian(const ChainSpec& spec, Index k) { return bond_hamiltonian(spec.bond_parameters(k)); }

enum class Parity { Even, Odd };

enum class SplittingScheme {
    SecondOrder,  // Strang: E(dt/2) O(dt) E(dt/2)
    ForestRuth,   // triple jump S2(w1) S2(w2) S2(w1)
    Suzuki5,      // S2(p) S2(p) S2(1-4p) S2(p) S2(p)
};

inline int splitting_order(SplittingScheme s) { return s == SplittingScheme::SecondOrder ? 2 : 4; }

struct BondGate {
    Index bond = 0;
    DenseTensor gate;  // (2,2,2,2): (s1', s2', s1, s2)
};

struct TrotterLayer {
    Parity parity = Parity::Even;
    double weight = 0.0;  // fraction of dt carried by this layer
    std::vector<BondGate> gates;
};

struct TrotterSchedule {
    double dt = 0.0;
    SplittingScheme scheme = SplittingScheme::Suzuki5;
    std::vector<TrotterLayer> layers;

    int order() const { return splitting_order(scheme); }

    // Flattened (bond, gate) stage list in application order.
    std::vector<const BondGate*> stages() const {
        std::vector<const BondGate*> out;
        for (const auto& l : layers)
            for (const auto& g : l.gates) out.push_back(&g);
        return out;
    }

    bool is_palindromic(double tol = 1e-14) const {
        const Index n = layers.size();
        for (Index i = 0; i < n / 2; ++i) {
            const auto& a = layers[i];
            const auto& b = layers[n - 1 - i];
            if (a.parity != b.parity || std::abs(a.weight - b.weight) > tol || a.gates.size() != b.gates.size())
                return false;
            for (Index g = 0; g < a.gates.size(); ++g) {
                if (a.gates[g].bond != b.gates[g].bond) return false;
                if ((a.gates[g].gate - b.gates[g].gate).norm() > tol) return false;
            }
        }
        return true;
    }
};

namespace detail {

struct LayerSpec {
    Parity parity;
    double weight;
};

inline void append_strang(std::vector<LayerSpec>& seq, double w) {
    seq.push_back({Parity::Even, 0.5 * w});
    seq.push_back({Parity::Odd, w});
    seq.push_back({Parity::Even, 0.5 * w});
}

inline std::vector<LayerSpec> splitting_sequence(SplittingScheme scheme) {
    std::vector<double> substeps;
    switch (scheme) {
    case SplittingScheme::SecondOrder:
        substeps = {1.0};
        break;
    case SplittingScheme::ForestRuth: {
        const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
        substeps = {w1, 1.0 - 2.0 * w1, w1};
        break;
    }
    case SplittingScheme::Suzuki5: {
        const double p = 1.0 / (4.0 - std::cbrt(4.0));
        substeps = {p, p, 1.0 - 4.0 * p, p, p};
        break;
    }
    }
    std::vector<LayerSpec> raw;
    for (double w : substeps) append_strang(raw, w);
    // Adjacent half-steps of the same parity commute and merge.
    std::vector<LayerSpec> merged;
    for (const auto& l : raw) {
        if (!merged.empty() && merged.back().parity == l.parity)
            merged.back().weight += l.weight;
        else
            merged.push_back(l);
    }
    return merged;
}

} // namespace detail

// Symmetric even/odd splitting of exp(-i H dt) for the given bond couplings.
inline TrotterSchedule trotter_schedule(const Couplings& couplings, double dt,
                                        SplittingScheme scheme = SplittingScheme::Suzuki5) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ArgumentError("time step must be non-negative");
    if (couplings.empty()) throw ArgumentError("schedule needs at least one bond");
    TrotterSchedule sched;
    sched.dt = dt;
    sched.scheme = scheme;
    std::vector<DenseTensor> h;
    for (const auto& c : couplings) h.push_back(bond_hamiltonian(c));
    for (const auto& spec : detail::splitting_sequence(scheme)) {
        TrotterLayer layer;
        layer.parity = spec.parity;
        layer.weight = spec.weight;
        const Index start = spec.parity == Parity::Even ? 0 : 1;
        for (Index k = start; k < couplings.size(); k += 2) {
            DenseTensor g = hermitian_gate_exponential(h[k], cplx{0.0, -spec.weight * dt});
            layer.gates.push_back({k, g.reshaped({2, 2, 2, 2})});
        }
        if (!layer.gates.empty()) sched.layers.push_back(std::move(layer));
    }
    // Dropping empty layers (single-bond chains) can leave two even layers
    // adjacent; merge them again so layers alternate.
    std::vector<TrotterLayer> merged;
    for (auto& l : sched.layers) {
        if (!merged.empty() && merged.back().parity == l.parity) {
            merged.back().weight += l.weight;
            for (Index i = 0; i < l.gates.size(); ++i) {
                const Index k = l.gates[i].bond;
                merged.back().gates[i].gate = hermitian_gate_exponential(h[k], cplx{0.0, -merged.back().weight * dt})
                                                  .reshaped({2, 2, 2, 2});
            }
        } else {
            merged.push_back(std::move(l));
        }
    }
    sched.layers = std::move(merged);
    return sched;
}

inline TrotterSchedule trotter_schedule(const ChainSpec& spec, double dt,
                                        SplittingScheme scheme = SplittingScheme::Suzuki5) {
    spec.validate();
    return trotter_schedule(spec.couplings(), dt, scheme);
}

} // namespace xxzb
