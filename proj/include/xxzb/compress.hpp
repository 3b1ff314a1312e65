#pragma once

// Variational MPS compression: maximize |<phi|psi>|^2 / (<phi|phi><psi|psi>)
// over phi with bond dimension <= target_D by one-site fitting sweeps,
// starting from the SVD-truncated psi.

#include <xxzb/errors.hpp>
#include <xxzb/mps.hpp>

#include <algorithm>
#include <cmath>

namespace xxzb {

struct CompressionResult {
    MatrixProductState state;
    double infidelity = 0.0;
    double svd_infidelity = 0.0;  // infidelity of the SVD-truncated initial guess
    int sweeps = 0;
};

inline double infidelity(const MatrixProductState& a, const MatrixProductState& b) {
    const double f = std::norm(overlap(a, b)) / (norm_squared(a) * norm_squared(b));
    return std::clamp(1.0 - f, 0.0, 1.0);
}

// Plain SVD truncation to target_D (right-to-left, center ends at site 0).
inline MatrixProductState svd_compress(const MatrixProductState& src, Index target_D) {
    MatrixProductState phi = src;
    const Index n = phi.length();
    phi.canonicalize(n - 1);
    for (Index i = n - 1; i > 0; --i) {
        const auto& a = phi.site(i);
        const Index dr = a.extent(2);
        auto svd = detail::truncated_svd(a.matrix(1), target_D, 0.0);
        const Index k = static_cast<Index>(svd.S.size());
        const Matrix us = svd.U * svd.S.asDiagonal();
        const auto& prev = phi.site(i - 1);
        const Matrix np = prev.matrix(2) * us;
        const Index pl = prev.extent(0);
        phi.set_site(i, detail::site_from(svd.V, k, dr));
        phi.set_site(i - 1, detail::site_from(np, pl, k));
    }
    phi.set_ortho_center(0);
    return phi;
}

inline CompressionResult variational_compress(const MatrixProductState& src, Index target_D, int max_sweeps = 6,
                                              double convergence_tol = 1e-12) {
    if (target_D < 1) throw ArgumentError("target bond dimension must be positive");
    CompressionResult out;
    if (src.max_bond_dimension() <= target_D) {
        out.state = src;
        return out;
    }
    MatrixProductState psi = src;
    psi.set_log_norm_adjust(0.0);
    const double psi_norm2 = norm_squared(psi);
    if (!(psi_norm2 > 0.0)) throw DomainError("cannot compress a zero state");

    MatrixProductState phi = svd_compress(psi, target_D);
    out.svd_infidelity = infidelity(phi, psi);

    const Index n = psi.length();
    std::vector<Matrix> left(n + 1), right(n + 1);
    left[0] = Matrix::Ones(1, 1);
    right[n] = Matrix::Ones(1, 1);
    for (Index i = n; i-- > 1;) right[i] = detail::transfer_right(right[i + 1], phi.site(i), psi.site(i));

    // Optimal phi_i for fixed isometric neighbours: L psi_i R^T per physical slice.
    auto local_fit = [&](Index i) {
        const auto& p = psi.site(i);
        const Index dl = phi.site(i).extent(0), dr = phi.site(i).extent(2);
        DenseTensor t({dl, kPhysicalDim, dr});
        for (Index s = 0; s < kPhysicalDim; ++s) {
            const Matrix m = left[i] * detail::site_slice(p, s) * right[i + 1].transpose();
            Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>> dst(t.raw() + s * dr, static_cast<Eigen::Index>(dl),
                                                               static_cast<Eigen::Index>(dr),
                                                               Eigen::OuterStride<>(2 * static_cast<Eigen::Index>(dr)));
            dst = m;
        }
        return t;
    };

    double best = out.svd_infidelity;
    MatrixProductState best_state = phi;
    double previous = out.svd_infidelity;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        for (Index i = 0; i < n; ++i) {
            phi.set_site(i, local_fit(i));
            if (i + 1 < n) {
                phi.set_ortho_center(i);
                phi.move_center_right(i);
                left[i + 1] = detail::transfer_left(left[i], phi.site(i), psi.site(i));
            }
        }
        for (Index i = n; i-- > 0;) {
            phi.set_site(i, local_fit(i));
            if (i > 0) {
                phi.set_ortho_center(i);
                phi.move_center_left(i);
                right[i] = detail::transfer_right(right[i + 1], phi.site(i), psi.site(i));
            }
        }
        phi.set_ortho_center(0);
        const double fid = std::pow(phi.site(0).norm(), 2) / psi_norm2;
        const double current = std::clamp(1.0 - fid, 0.0, 1.0);
        if (current < best) {
            best = current;
            best_state = phi;
        }
        const double improvement = previous - current;
        previous = current;
        if (improvement < convergence_tol) {
            ++sweep;
            break;
        }
    }
    best_state.set_log_norm_adjust(src.log_norm_adjust());
    out.state = std::move(best_state);
    out.infidelity = best;
    out.sweeps = sweep;
    return out;
}

} // namespace xxzb
