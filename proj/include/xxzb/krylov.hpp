#pragma once

// Lanczos routines for Hermitian operators given as matrix-free callables
// Vector -> Vector.

#include <xxzb/errors.hpp>
#include <xxzb/tensor.hpp>

#include <cmath>
#include <vector>

namespace xxzb::krylov {

struct EigenPair {
    double value = 0.0;
    Vector vector;
    double residual = 0.0;
    int iterations = 0;
};

namespace detail {

// Builds an orthonormal Lanczos basis (full reorthogonalization) of at most
// `max_dim` vectors starting from normalized `v0`. alpha/beta hold the
// tridiagonal projection; the returned residual_beta is the norm of the
// component leaving the subspace.
template <typename Apply>
double lanczos_basis(Apply& apply, const Vector& v0, int max_dim, std::vector<Vector>& basis,
                     std::vector<double>& alpha, std::vector<double>& beta, double breakdown = 1e-14) {
    basis.clear();
    alpha.clear();
    beta.clear();
    basis.push_back(v0);
    double residual_beta = 0.0;
    for (int j = 0; j < max_dim; ++j) {
        Vector w = apply(basis[j]);
        const double a = std::real(basis[j].dot(w));
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) w -= q * q.dot(w);
        const double b = w.norm();
        residual_beta = b;
        if (b < breakdown || j + 1 == max_dim) break;
        beta.push_back(b);
        basis.push_back(w / b);
    }
    return residual_beta;
}

inline Eigen::MatrixXd tridiagonal(const std::vector<double>& alpha, const std::vector<double>& beta) {
    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) t(i, i) = alpha[static_cast<Index>(i)];
    for (Eigen::Index i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[static_cast<Index>(i)];
    return t;
}

} // namespace detail

// Lowest eigenpair by restarted Lanczos. Deterministic given v0.
template <typename Apply>
EigenPair lowest_eigenpair(Apply&& apply, Vector v0, int krylov_dim = 40, double tol = 1e-12, int max_restarts = 50) {
    const double n0 = v0.norm();
    if (!(n0 > 0.0)) throw ArgumentError("Lanczos start vector is zero");
    v0 /= n0;
    EigenPair best;
    std::vector<Vector> basis;
    std::vector<double> alpha, beta;
    for (int restart = 0; restart <= max_restarts; ++restart) {
        const int dim = std::min<int>(krylov_dim, static_cast<int>(v0.size()));
        detail::lanczos_basis(apply, v0, dim, basis, alpha, beta);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(detail::tridiagonal(alpha, beta));
        const Eigen::VectorXd y = eig.eigenvectors().col(0);
        Vector x = Vector::Zero(v0.size());
        for (Index i = 0; i < basis.size(); ++i) x += y(static_cast<Eigen::Index>(i)) * basis[i];
        x.normalize();
        const Vector hx = apply(x);
        const double value = std::real(x.dot(hx));
        const double res = (hx - value * x).norm();
        best.value = value;
        best.vector = x;
        best.residual = res;
        best.iterations += static_cast<int>(basis.size());
        if (res < tol || static_cast<int>(basis.size()) < dim) break;
        v0 = x;
    }
    return best;
}

// exp(-i t H) v by Lanczos with adaptive sub-stepping: the interval is halved
// until the a-posteriori error estimate is within tol.
template <typename Apply>
Vector expm_minus_i(Apply&& apply, const Vector& v, double t, double tol = 1e-10, int max_dim = 64) {
    const double nv = v.norm();
    if (nv == 0.0 || t == 0.0) return v;
    Vector state = v / nv;
    double remaining = t;
    double step = t;
    std::vector<Vector> basis;
    std::vector<double> alpha, beta;
    int guard = 0;
    while (std::abs(remaining) > 0.0) {
        if (++guard > 100000) throw DecompositionError("Krylov propagation failed to make progress");
        if (std::abs(step) > std::abs(remaining)) step = remaining;
        const int dim = std::min<int>(max_dim, static_cast<int>(state.size()));
        const double res_beta = detail::lanczos_basis(apply, state, dim, basis, alpha, beta);
        const auto m = static_cast<Eigen::Index>(alpha.size());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(detail::tridiagonal(alpha, beta));
        for (;;) {
            Eigen::VectorXcd phase(m);
            for (Eigen::Index i = 0; i < m; ++i) phase(i) = std::exp(cplx{0.0, -step * eig.eigenvalues()(i)});
            const Eigen::VectorXcd coeff =
                eig.eigenvectors().cast<cplx>() * (phase.asDiagonal() * eig.eigenvectors().row(0).transpose().cast<cplx>());
            const bool exhausted = static_cast<int>(basis.size()) < dim || res_beta < 1e-14;
            const double err = exhausted ? 0.0 : res_beta * std::abs(coeff(m - 1));
            if (err <= tol * std::abs(step) / std::max(std::abs(t), 1e-300) || err <= tol * 1e-3) {
                Vector next = Vector::Zero(state.size());
                for (Eigen::Index i = 0; i < m; ++i) next += coeff(i) * basis[static_cast<Index>(i)];
                state = next / next.norm();
                remaining -= step;
                if (err < 1e-2 * tol) step *= 1.5;
                break;
            }
            step *= 0.5;
            if (std::abs(step) < 1e-12 * std::abs(t)) throw DecompositionError("Krylov step size underflow");
        }
    }
    return state * nv;
}

} // namespace xxzb::krylov
