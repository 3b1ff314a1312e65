#pragma once

// Two-site DMRG for the open XXZ chain.

#include <xxzb/errors.hpp>
#include <xxzb/krylov.hpp>
#include <xxzb/model.hpp>
#include <xxzb/mps.hpp>
#include <xxzb/pauli.hpp>
#include <xxzb/tensor.hpp>

#include <cmath>
#include <vector>

namespace xxzb {

// Matrix product operator; site tensors are (w_left, w_right, s_out, s_in).
struct MatrixProductOperator {
    std::vector<DenseTensor> sites;
    Index length() const { return sites.size(); }
};

// sum_k 2 J_k (S+_k S-_{k+1} + S-_k S+_{k+1}) + Jz_k Z_k Z_{k+1}
// Channel 4 = no operator placed yet, channel 0 = term completed.
inline MatrixProductOperator xxz_mpo(const Couplings& couplings) {
    const Index n = couplings.size() + 1;
    if (n < 2) throw ArgumentError("MPO needs at least two sites");
    constexpr Index w = 5;
    using namespace pauli;
    const pauli::Op id = identity(), sp = raise(), sm = lower(), sz = z();
    auto put = [](DenseTensor& t, Index a, Index b, const pauli::Op& op, cplx coef) {
        for (Index s = 0; s < 2; ++s)
            for (Index r = 0; r < 2; ++r)
                t(a, b, s, r) += coef * op(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r));
    };
    MatrixProductOperator mpo;
    for (Index i = 0; i < n; ++i) {
        DenseTensor full({w, w, 2, 2});
        put(full, 0, 0, id, 1.0);
        put(full, 4, 4, id, 1.0);
        put(full, 1, 0, sm, 1.0);
        put(full, 2, 0, sp, 1.0);
        put(full, 3, 0, sz, 1.0);
        if (i + 1 < n) {
            const auto& c = couplings[i];
            put(full, 4, 1, sp, 2.0 * c.J);
            put(full, 4, 2, sm, 2.0 * c.J);
            put(full, 4, 3, sz, c.Jz);
        }
        const Index wl = i == 0 ? 1 : w, wr = i + 1 == n ? 1 : w;
        DenseTensor t({wl, wr, 2, 2});
        for (Index a = 0; a < wl; ++a)
            for (Index b = 0; b < wr; ++b)
                for (Index s = 0; s < 2; ++s)
                    for (Index r = 0; r < 2; ++r)
                        t(a, b, s, r) = full(i == 0 ? 4 : a, i + 1 == n ? 0 : b, s, r);
        mpo.sites.push_back(std::move(t));
    }
    return mpo;
}

namespace detail {

// Environments are (bra bond, mpo bond, ket bond).
inline DenseTensor mpo_env_left(const DenseTensor& env, const DenseTensor& a, const DenseTensor& w) {
    const DenseTensor t1 = contract(env, a, {{2, 0}});               // (a, w, t, b')
    const DenseTensor t2 = contract(t1, w, {{1, 0}, {2, 3}});        // (a, b', w', s)
    const DenseTensor t3 = contract(t2, a.conj(), {{0, 0}, {3, 1}});  // (b', w', a')
    return t3.permuted({2, 1, 0});
}

inline DenseTensor mpo_env_right(const DenseTensor& env, const DenseTensor& a, const DenseTensor& w) {
    const DenseTensor t1 = contract(a, env, {{2, 2}});               // (b, t, a', w')
    const DenseTensor t2 = contract(t1, w, {{1, 3}, {3, 1}});        // (b, a', w, s)
    const DenseTensor t3 = contract(t2, a.conj(), {{1, 2}, {3, 1}});  // (b, w, a)
    return t3.permuted({2, 1, 0});
}

inline DenseTensor apply_two_site_heff(const DenseTensor& left, const DenseTensor& w1, const DenseTensor& w2,
                                       const DenseTensor& right, const DenseTensor& theta) {
    const DenseTensor x1 = contract(left, theta, {{2, 0}});         // (a, w, s1, s2, b)
    const DenseTensor x2 = contract(x1, w1, {{1, 0}, {2, 3}});      // (a, s2, b, w', s1')
    const DenseTensor x3 = contract(x2, w2, {{3, 0}, {1, 3}});      // (a, b, s1', w'', s2')
    const DenseTensor x4 = contract(x3, right, {{1, 2}, {3, 1}});   // (a, s1', s2', r)
    return x4;
}

inline DenseTensor boundary_env() {
    DenseTensor e({1, 1, 1});
    e(0, 0, 0) = 1.0;
    return e;
}

} // namespace detail

inline cplx mpo_expectation(const MatrixProductState& psi, const MatrixProductOperator& mpo) {
    if (psi.length() != mpo.length()) throw ArgumentError("MPO and MPS lengths differ");
    DenseTensor env = detail::boundary_env();
    for (Index i = 0; i < psi.length(); ++i) env = detail::mpo_env_left(env, psi.site(i), mpo.sites[i]);
    MatrixProductState unit = psi;
    unit.set_log_norm_adjust(0.0);
    return env(0, 0, 0) / norm_squared(unit);
}

// Exact MPO |psi>, bond dimensions multiply.
inline MatrixProductState apply_mpo(const MatrixProductOperator& mpo, const MatrixProductState& psi) {
    if (psi.length() != mpo.length()) throw ArgumentError("MPO and MPS lengths differ");
    std::vector<DenseTensor> out;
    for (Index i = 0; i < psi.length(); ++i) {
        const auto& a = psi.site(i);
        const auto& w = mpo.sites[i];
        const DenseTensor t = contract(a, w, {{1, 3}});  // (a, b, wl, wr, s)
        const DenseTensor p = t.permuted({0, 2, 4, 1, 3});
        out.push_back(p.reshaped({a.extent(0) * w.extent(0), 2, a.extent(2) * w.extent(1)}));
    }
    return MatrixProductState(std::move(out), std::nullopt, psi.log_norm_adjust());
}

struct DmrgOptions {
    Index max_D = 64;
    int max_sweeps = 30;
    double energy_tol = 1e-10;
    double weight_tol = 1e-14;
    int krylov_dim = 30;
    double eig_tol = 1e-12;
    bool operator==(const DmrgOptions&) const = default;
};

struct GroundStateResult {
    MatrixProductState state;
    double energy = 0.0;
    double variance = 0.0;
    int sweeps_used = 0;
    std::vector<double> sweep_energies;
    double total_magnetization = 0.0;
};

inline double total_magnetization(const MatrixProductState& psi) {
    ExpectationCache cache(psi);
    double m = 0.0;
    for (Index i = 0; i < psi.length(); ++i) m += std::real(cache.one_site(pauli::z(), i));
    return m;
}

inline double energy_variance(const MatrixProductState& psi, const MatrixProductOperator& mpo) {
    MatrixProductState unit = psi;
    unit.set_log_norm_adjust(0.0);
    const double n2 = norm_squared(unit);
    const MatrixProductState hpsi = apply_mpo(mpo, unit);
    const double e = std::real(overlap(unit, hpsi)) / n2;
    const double h2 = std::real(overlap(hpsi, hpsi)) / n2;
    return h2 - e * e;
}

inline std::vector<int> neel_bits(Index n) {
    std::vector<int> bits(n);
    for (Index i = 0; i < n; ++i) bits[i] = i % 2 == 0 ? 1 : 0;
    return bits;
}

// Ground state of the open XXZ chain with the given couplings, seeded from
// the Neel state (zero-magnetization sector; the Hamiltonian conserves it).
inline GroundStateResult dmrg_ground_state(const Couplings& couplings, const DmrgOptions& opt = {}) {
    const Index n = couplings.size() + 1;
    if (n < 2) throw ArgumentError("ground state needs N >= 2");
    if (n % 2 != 0) throw ArgumentError("ground state search needs even N (zero-magnetization sector)");
    if (opt.max_D < 1) throw ArgumentError("max_D must be positive");
    const auto mpo = xxz_mpo(couplings);
    const auto bits = neel_bits(n);
    MatrixProductState psi = from_product_state(std::span<const int>(bits));
    psi.canonicalize(0);

    std::vector<DenseTensor> left(n + 1), right(n + 1);
    left[0] = detail::boundary_env();
    right[n] = detail::boundary_env();
    // right[i] covers sites >= i
    for (Index i = n; i-- > 1;) right[i] = detail::mpo_env_right(right[i + 1], psi.site(i), mpo.sites[i]);

    GroundStateResult result;
    double last_energy = std::numeric_limits<double>::infinity();
    double energy = 0.0;

    auto local_step = [&](Index i, bool moving_right) {
        const auto& a = psi.site(i);
        const auto& b = psi.site(i + 1);
        const Index dl = a.extent(0), dr = b.extent(2);
        const DenseTensor theta = contract(a, b, {{2, 0}});  // (dl, 2, 2, dr)
        const Shape shape = theta.shape();
        auto apply = [&](const Vector& v) -> Vector {
            DenseTensor t(shape, std::vector<cplx>(v.data(), v.data() + v.size()));
            const DenseTensor r = detail::apply_two_site_heff(left[i], mpo.sites[i], mpo.sites[i + 1], right[i + 2], t);
            return Eigen::Map<const Vector>(r.raw(), static_cast<Eigen::Index>(r.size()));
        };
        const Vector v0 = Eigen::Map<const Vector>(theta.raw(), static_cast<Eigen::Index>(theta.size()));
        const auto pair = krylov::lowest_eigenpair(apply, v0, opt.krylov_dim, opt.eig_tol);
        energy = pair.value;
        Eigen::Map<const RowMatrix> m(pair.vector.data(), static_cast<Eigen::Index>(dl * 2),
                                      static_cast<Eigen::Index>(2 * dr));
        auto svd = xxzb::detail::truncated_svd(m, opt.max_D, opt.weight_tol);
        const Index k = static_cast<Index>(svd.S.size());
        const Eigen::VectorXd s = svd.S / svd.S.norm();
        if (moving_right) {
            psi.set_site(i, xxzb::detail::site_from(svd.U, dl, k));
            psi.set_site(i + 1, xxzb::detail::site_from(s.asDiagonal() * svd.V, k, dr));
            psi.set_ortho_center(i + 1);
            left[i + 1] = detail::mpo_env_left(left[i], psi.site(i), mpo.sites[i]);
        } else {
            psi.set_site(i, xxzb::detail::site_from(svd.U * s.asDiagonal(), dl, k));
            psi.set_site(i + 1, xxzb::detail::site_from(svd.V, k, dr));
            psi.set_ortho_center(i);
            right[i + 1] = detail::mpo_env_right(right[i + 2], psi.site(i + 1), mpo.sites[i + 1]);
        }
    };

    int sweep = 0;
    for (; sweep < opt.max_sweeps; ++sweep) {
        for (Index i = 0; i + 1 < n; ++i) local_step(i, true);
        for (Index i = n - 1; i-- > 0;) local_step(i, false);
        result.sweep_energies.push_back(energy);
        if (std::abs(last_energy - energy) < opt.energy_tol) {
            ++sweep;
            break;
        }
        last_energy = energy;
    }
    result.sweeps_used = sweep;
    result.energy = energy;
    result.variance = energy_variance(psi, mpo);
    result.total_magnetization = total_magnetization(psi);
    if (std::abs(result.total_magnetization) >= 1e-6)
        throw SectorError("ground-state search left the zero-magnetization sector (<sum Z> = " +
                          std::to_string(result.total_magnetization) + "); try a different seed state");
    result.state = std::move(psi);
    return result;
}

inline GroundStateResult dmrg_ground_state(int N, double J, double Jz, const DmrgOptions& opt = {}) {
    return dmrg_ground_state(uniform_couplings(static_cast<Index>(N), J, Jz), opt);
}

} // namespace xxzb
