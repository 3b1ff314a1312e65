#pragma once

// Initial states |11..1> (x) |S> (x) |00..0> for the battery geometry.

#include <xxzb/dmrg.hpp>
#include <xxzb/errors.hpp>
#include <xxzb/model.hpp>
#include <xxzb/mps.hpp>

#include <optional>
#include <string>
#include <vector>

namespace xxzb {

struct SystemPrep {
    enum class Kind { Ground, GHZ, Neel, ExplicitBits };
    Kind kind = Kind::Ground;
    std::vector<int> bits;  // ExplicitBits only, one per system site

    static SystemPrep ground() { return {Kind::Ground, {}}; }
    static SystemPrep ghz() { return {Kind::GHZ, {}}; }
    static SystemPrep neel() { return {Kind::Neel, {}}; }
    static SystemPrep explicit_bits(std::vector<int> b) { return {Kind::ExplicitBits, std::move(b)}; }

    bool operator==(const SystemPrep&) const = default;
};

inline std::string to_string(SystemPrep::Kind k) {
    switch (k) {
    case SystemPrep::Kind::Ground: return "ground";
    case SystemPrep::Kind::GHZ: return "ghz";
    case SystemPrep::Kind::Neel: return "neel";
    case SystemPrep::Kind::ExplicitBits: return "bits";
    }
    return "?";
}

constexpr double kMagnetizationTolerance = 1e-6;

// System-chain state for a preparation. Ground states come from
// `ground_source` when given, otherwise from a DMRG solve.
inline MatrixProductState system_state(const ChainSpec& spec, const SystemPrep& prep,
                                       const MatrixProductState* ground_source = nullptr,
                                       const DmrgOptions& dmrg = {}) {
    const auto n = static_cast<Index>(spec.N);
    switch (prep.kind) {
    case SystemPrep::Kind::GHZ:
        return ghz_state(n);
    case SystemPrep::Kind::Neel: {
        const auto bits = neel_bits(n);
        return from_product_state(std::span<const int>(bits));
    }
    case SystemPrep::Kind::ExplicitBits:
        if (prep.bits.size() != n)
            throw PreparationError("explicit system bits must have N = " + std::to_string(n) + " entries");
        return from_product_state(std::span<const int>(prep.bits));
    case SystemPrep::Kind::Ground: {
        MatrixProductState g = ground_source ? *ground_source : dmrg_ground_state(spec.system_couplings(), dmrg).state;
        if (g.length() != n) throw PreparationError("ground state has the wrong length");
        const double m = total_magnetization(g);
        if (std::abs(m) > kMagnetizationTolerance)
            throw PreparationError("system ground state has nonzero total magnetization " + std::to_string(m));
        return g;
    }
    }
    throw PreparationError("unknown system preparation");
}

// Left lead all up, system, right lead all down. The result is normalized
// with its canonical center on the first system site.
inline MatrixProductState assemble_battery_state(const ChainSpec& spec, MatrixProductState system) {
    spec.validate();
    if (system.length() != static_cast<Index>(spec.N)) throw PreparationError("system state has the wrong length");
    system.canonicalize(0);
    system.normalize();
    system.set_log_norm_adjust(0.0);
    std::vector<DenseTensor> sites;
    auto lead_site = [](int bit) {
        DenseTensor t({1, kPhysicalDim, 1});
        t(0, bit, 0) = 1.0;
        return t;
    };
    for (int i = 0; i < spec.N_b; ++i) sites.push_back(lead_site(1));
    for (const auto& s : system.sites()) sites.push_back(s);
    for (int i = 0; i < spec.N_b; ++i) sites.push_back(lead_site(0));
    return MatrixProductState(std::move(sites), spec.system_first());
}

inline MatrixProductState initial_state(const ChainSpec& spec, const SystemPrep& prep,
                                        const MatrixProductState* ground_source = nullptr,
                                        const DmrgOptions& dmrg = {}) {
    spec.validate();
    return assemble_battery_state(spec, system_state(spec, prep, ground_source, dmrg));
}

} // namespace xxzb
