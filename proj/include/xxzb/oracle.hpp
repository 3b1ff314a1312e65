#pragma once

// Exact state-vector reference for small chains. Basis index bit (L-1-i)
// holds site i, so site 0 is the most significant bit; bit value 1 is spin up.

#include <xxzb/errors.hpp>
#include <xxzb/krylov.hpp>
#include <xxzb/model.hpp>
#include <xxzb/mps.hpp>
#include <xxzb/trajectory.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace xxzb::oracle {

constexpr Index kMaxSparseSites = 24;
constexpr Index kMaxDenseSites = 12;
constexpr Index kMaxRdmSites = 12;

struct DenseState {
    Index L = 0;
    Vector amplitudes;
};

inline void check_sparse_capacity(Index L) {
    if (L > kMaxSparseSites)
        throw CapacityError("exact oracle supports at most " + std::to_string(kMaxSparseSites) + " sites, got " +
                            std::to_string(L));
}

inline int site_bit(std::uint64_t x, Index L, Index site) { return static_cast<int>((x >> (L - 1 - site)) & 1u); }

inline DenseState product_state(std::span<const int> bits) {
    check_sparse_capacity(bits.size());
    DenseState s;
    s.L = bits.size();
    std::uint64_t idx = 0;
    for (int b : bits) idx = (idx << 1) | static_cast<std::uint64_t>(b & 1);
    s.amplitudes = Vector::Zero(Eigen::Index{1} << s.L);
    s.amplitudes(static_cast<Eigen::Index>(idx)) = 1.0;
    return s;
}

// Full contraction of an MPS (small chains only).
inline DenseState from_mps(const MatrixProductState& psi) {
    check_sparse_capacity(psi.length());
    RowMatrix block = psi.site(0).matrix(2);
    for (Index i = 1; i < psi.length(); ++i) {
        const RowMatrix next = block * psi.site(i).matrix(1);
        block = Eigen::Map<const RowMatrix>(next.data(), next.rows() * 2, next.cols() / 2);
    }
    DenseState s;
    s.L = psi.length();
    s.amplitudes = Eigen::Map<const Vector>(block.data(), block.size()) * std::exp(psi.log_norm_adjust());
    return s;
}

// H v, applied bond by bond without storing H.
inline Vector apply_hamiltonian(const Couplings& couplings, const Vector& v) {
    const Index L = couplings.size() + 1;
    const auto dim = static_cast<std::uint64_t>(v.size());
    Vector out = Vector::Zero(v.size());
    for (Index k = 0; k + 1 < L; ++k) {
        const auto& c = couplings[k];
        const std::uint64_t m1 = std::uint64_t{1} << (L - 1 - k);
        const std::uint64_t m2 = std::uint64_t{1} << (L - 2 - k);
        for (std::uint64_t x = 0; x < dim; ++x) {
            const bool b1 = x & m1, b2 = x & m2;
            const cplx a = v(static_cast<Eigen::Index>(x));
            if (b1 == b2) {
                out(static_cast<Eigen::Index>(x)) += c.Jz * a;
            } else {
                out(static_cast<Eigen::Index>(x)) -= c.Jz * a;
                out(static_cast<Eigen::Index>(x ^ m1 ^ m2)) += 2.0 * c.J * a;
            }
        }
    }
    return out;
}

inline Matrix dense_hamiltonian(const Couplings& couplings) {
    const Index L = couplings.size() + 1;
    if (L > kMaxDenseSites)
        throw CapacityError("dense Hamiltonian limited to " + std::to_string(kMaxDenseSites) + " sites");
    const auto dim = Eigen::Index{1} << L;
    Matrix h(dim, dim);
    Vector e = Vector::Zero(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        e(j) = 1.0;
        h.col(j) = apply_hamiltonian(couplings, e);
        e(j) = 0.0;
    }
    return h;
}

inline std::vector<double> z_profile(const DenseState& s) {
    std::vector<double> z(s.L, 0.0);
    for (Eigen::Index x = 0; x < s.amplitudes.size(); ++x) {
        const double p = std::norm(s.amplitudes(x));
        if (p == 0.0) continue;
        for (Index i = 0; i < s.L; ++i) z[i] += site_bit(static_cast<std::uint64_t>(x), s.L, i) ? p : -p;
    }
    const double n2 = s.amplitudes.squaredNorm();
    for (auto& v : z) v /= n2;
    return z;
}

// Q_k = 2 J_k <X_k Y_{k+1} - Y_k X_{k+1}>. In this basis the operator is
// 2i|10><01| - 2i|01><10| on the bond, so <.> = -4 Im(conj(c_10) c_01).
inline std::vector<double> current_profile(const DenseState& s, const Couplings& couplings) {
    const Index L = s.L;
    std::vector<double> q(L - 1, 0.0);
    const double n2 = s.amplitudes.squaredNorm();
    for (Index k = 0; k + 1 < L; ++k) {
        const std::uint64_t m1 = std::uint64_t{1} << (L - 1 - k);
        const std::uint64_t m2 = std::uint64_t{1} << (L - 2 - k);
        double acc = 0.0;
        for (std::uint64_t x = 0; x < static_cast<std::uint64_t>(s.amplitudes.size()); ++x) {
            if ((x & m1) && !(x & m2)) {
                const cplx c10 = s.amplitudes(static_cast<Eigen::Index>(x));
                const cplx c01 = s.amplitudes(static_cast<Eigen::Index>(x ^ m1 ^ m2));
                acc += -4.0 * std::imag(std::conj(c10) * c01);
            }
        }
        q[k] = 2.0 * couplings[k].J * acc / n2;
    }
    return q;
}

inline double energy(const DenseState& s, const Couplings& couplings) {
    return std::real(s.amplitudes.dot(apply_hamiltonian(couplings, s.amplitudes))) / s.amplitudes.squaredNorm();
}

inline int krylov_dim_for(Index L) {
    // Keep the Lanczos basis within ~1 GiB.
    const double bytes_per_vector = 16.0 * std::pow(2.0, static_cast<double>(L));
    const int fit = static_cast<int>((1024.0 * 1024.0 * 1024.0) / bytes_per_vector);
    return std::clamp(fit, 8, 64);
}

// Propagates through the time grid (first entry is the initial time) and
// records exact observables at every grid point.
inline TrajectoryRecord exact_evolve(const Couplings& couplings, const DenseState& initial,
                                     std::span<const double> times, Index junction_bond = 0, double tol = 1e-10) {
    const Index L = couplings.size() + 1;
    if (initial.L != L) throw ArgumentError("initial state length does not match couplings");
    check_sparse_capacity(L);
    if (times.empty()) throw ArgumentError("time grid is empty");
    TrajectoryRecord rec;
    rec.length = L;
    rec.junction_bond = junction_bond;
    auto apply = [&](const Vector& v) { return apply_hamiltonian(couplings, v); };
    Vector psi = initial.amplitudes;
    const int kdim = krylov_dim_for(L);
    for (Index n = 0; n < times.size(); ++n) {
        if (n > 0) {
            const double dt = times[n] - times[n - 1];
            if (!(dt > 0.0)) throw ArgumentError("time grid must be strictly increasing");
            psi = krylov::expm_minus_i(apply, psi, dt, tol, kdim);
        }
        DenseState s{L, psi};
        rec.append(n, times[n], z_profile(s), current_profile(s, couplings), psi.norm(), 0, 0.0, 0.0);
    }
    return rec;
}

struct GroundState {
    DenseState state;
    double energy = 0.0;
    double residual = 0.0;
};

// Smallest eigenpair: full diagonalization up to 10 sites, seeded Lanczos
// beyond.
inline GroundState exact_ground_state(const Couplings& couplings, std::uint64_t seed = 7) {
    const Index L = couplings.size() + 1;
    if (L > 14) throw CapacityError("exact ground state supports at most 14 sites, got " + std::to_string(L));
    GroundState g;
    g.state.L = L;
    if (L <= 10) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(dense_hamiltonian(couplings));
        g.energy = eig.eigenvalues()(0);
        g.state.amplitudes = eig.eigenvectors().col(0);
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        Vector v0(Eigen::Index{1} << L);
        for (Eigen::Index i = 0; i < v0.size(); ++i) v0(i) = nd(rng);
        auto apply = [&](const Vector& v) { return apply_hamiltonian(couplings, v); };
        const auto pair = krylov::lowest_eigenpair(apply, v0, 120, 1e-10, 200);
        g.energy = pair.value;
        g.state.amplitudes = pair.vector;
    }
    const Vector hv = apply_hamiltonian(couplings, g.state.amplitudes);
    g.residual = (hv - g.energy * g.state.amplitudes).norm();
    return g;
}

inline ReducedDensityMatrix exact_rdm(const DenseState& s, Index first, Index count) {
    if (count == 0 || first + count > s.L) throw ArgumentError("RDM site range out of bounds");
    if (count > kMaxRdmSites)
        throw CapacityError("exact RDM limited to " + std::to_string(kMaxRdmSites) + " sites");
    const auto left = Eigen::Index{1} << first;
    const auto mid = Eigen::Index{1} << count;
    const auto right = Eigen::Index{1} << (s.L - first - count);
    Matrix rho = Matrix::Zero(mid, mid);
    for (Eigen::Index l = 0; l < left; ++l) {
        // psi[l, p, r] as a (mid x right) block
        Eigen::Map<const RowMatrix> blk(s.amplitudes.data() + l * mid * right, mid, right);
        rho.noalias() += blk * blk.adjoint();
    }
    ReducedDensityMatrix r;
    r.first_site = first;
    r.site_count = count;
    r.matrix = rho / std::real(rho.trace());
    return r;
}

} // namespace xxzb::oracle
