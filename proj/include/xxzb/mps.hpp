#pragma once

// Finite matrix product states for spin-1/2 chains.
//
// Site tensors have shape (left bond, physical = 2, right bond). The
// represented state is exp(log_norm_adjust) times the contraction of the
// site tensors; norm factors are never silently re-multiplied.

#include <xxzb/errors.hpp>
#include <xxzb/pauli.hpp>
#include <xxzb/tensor.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xxzb {

constexpr Index kPhysicalDim = 2;

namespace detail {

using SliceMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// A[:, s, :] as a Dl x Dr matrix.
inline SliceMap site_slice(const DenseTensor& a, Index s) {
    const auto dl = static_cast<Eigen::Index>(a.extent(0));
    const auto dr = static_cast<Eigen::Index>(a.extent(2));
    return {a.raw() + s * a.extent(2), dl, dr, Eigen::OuterStride<>(2 * dr)};
}

struct QR {
    Matrix Q;  // thin, orthonormal columns
    Matrix R;
};

template <typename Derived>
QR thin_qr(const Eigen::MatrixBase<Derived>& m) {
    const Eigen::Index rows = m.rows(), cols = m.cols();
    const Eigen::Index k = std::min(rows, cols);
    Eigen::HouseholderQR<Matrix> qr{Matrix(m)};
    QR out;
    out.Q = qr.householderQ() * Matrix::Identity(rows, k);
    out.R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    return out;
}

inline DenseTensor site_from(const Matrix& m, Index dl, Index dr) {
    DenseTensor t({dl, kPhysicalDim, dr});
    Eigen::Map<RowMatrix>(t.raw(), m.rows(), m.cols()) = m;
    return t;
}

// E' = sum_s A_s^dagger E B_s  (bra a, ket b)
inline Matrix transfer_left(const Matrix& env, const DenseTensor& bra, const DenseTensor& ket) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(bra.extent(2)), static_cast<Eigen::Index>(ket.extent(2)));
    for (Index s = 0; s < kPhysicalDim; ++s) out.noalias() += site_slice(bra, s).adjoint() * (env * site_slice(ket, s));
    return out;
}

// E' = sum_s conj(A_s) E B_s^T
inline Matrix transfer_right(const Matrix& env, const DenseTensor& bra, const DenseTensor& ket) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(bra.extent(0)), static_cast<Eigen::Index>(ket.extent(0)));
    for (Index s = 0; s < kPhysicalDim; ++s)
        out.noalias() += site_slice(bra, s).conjugate() * (env * site_slice(ket, s).transpose());
    return out;
}

} // namespace detail

class MatrixProductState {
  public:
    MatrixProductState() = default;

    explicit MatrixProductState(std::vector<DenseTensor> sites, std::optional<Index> center = std::nullopt,
                                double log_norm_adjust = 0.0)
        : sites_(std::move(sites)), center_(center), log_norm_(log_norm_adjust) {
        validate();
    }

    Index length() const noexcept { return sites_.size(); }
    const DenseTensor& site(Index i) const { return sites_.at(i); }
    const std::vector<DenseTensor>& sites() const noexcept { return sites_; }

    // Replaces a site tensor; the canonical center is forgotten.
    void set_site(Index i, DenseTensor t) {
        sites_.at(i) = std::move(t);
        center_.reset();
    }

    std::optional<Index> ortho_center() const noexcept { return center_; }
    void set_ortho_center(std::optional<Index> c) { center_ = c; }

    double log_norm_adjust() const noexcept { return log_norm_; }
    void set_log_norm_adjust(double v) { log_norm_ = v; }

    // Extent of the bond between sites i and i+1.
    Index bond_dimension(Index i) const { return sites_.at(i).extent(2); }

    Index max_bond_dimension() const {
        Index d = 1;
        for (const auto& s : sites_) d = std::max(d, s.extent(2));
        return d;
    }

    std::vector<Index> bond_dimensions() const {
        std::vector<Index> d;
        for (Index i = 0; i + 1 < sites_.size(); ++i) d.push_back(sites_[i].extent(2));
        return d;
    }

    void validate() const {
        if (sites_.empty()) throw ArgumentError("MPS needs at least one site");
        for (Index i = 0; i < sites_.size(); ++i) {
            const auto& s = sites_[i];
            if (s.rank() != 3) throw DimensionError("MPS site " + std::to_string(i) + " is not rank 3");
            if (s.extent(1) != kPhysicalDim)
                throw DimensionError("MPS site " + std::to_string(i) + " has physical extent " +
                                     std::to_string(s.extent(1)));
            if (i > 0 && sites_[i - 1].extent(2) != s.extent(0))
                throw DimensionError("bond extents disagree between sites " + std::to_string(i - 1) + " and " +
                                     std::to_string(i));
        }
        if (sites_.front().extent(0) != 1 || sites_.back().extent(2) != 1)
            throw DimensionError("boundary bonds of an MPS must have extent 1");
        if (center_ && *center_ >= sites_.size()) throw ArgumentError("orthogonality center out of range");
    }

    // ||A^dagger A - 1|| with A grouped as (left, phys) x right.
    double left_isometry_error(Index i) const {
        auto m = sites_.at(i).matrix(2);
        return (m.adjoint() * m - Matrix::Identity(m.cols(), m.cols())).norm();
    }

    // ||A A^dagger - 1|| with A grouped as left x (phys, right).
    double right_isometry_error(Index i) const {
        auto m = sites_.at(i).matrix(1);
        return (m * m.adjoint() - Matrix::Identity(m.rows(), m.rows())).norm();
    }

    bool is_canonical_at(Index c, double tol = 1e-10) const {
        for (Index i = 0; i < c; ++i)
            if (left_isometry_error(i) > tol) return false;
        for (Index i = c + 1; i < sites_.size(); ++i)
            if (right_isometry_error(i) > tol) return false;
        return true;
    }

    // Recovers the canonical center from the tensors alone (used after
    // loading a checkpoint). Picks the leftmost consistent center.
    std::optional<Index> detect_ortho_center(double tol = 1e-10) const {
        Index left_ok = 0;
        while (left_ok < sites_.size() && left_isometry_error(left_ok) <= tol) ++left_ok;
        for (Index c = 0; c <= std::min(left_ok, sites_.size() - 1); ++c) {
            bool ok = true;
            for (Index i = c + 1; i < sites_.size() && ok; ++i) ok = right_isometry_error(i) <= tol;
            if (ok) return c;
        }
        return std::nullopt;
    }

    void move_center_right(Index i) {
        auto& a = sites_.at(i);
        auto& b = sites_.at(i + 1);
        const Index dl = a.extent(0);
        auto qr = detail::thin_qr(a.matrix(2));
        const Index k = static_cast<Index>(qr.Q.cols());
        a = detail::site_from(qr.Q, dl, k);
        const Matrix nb = qr.R * b.matrix(1);
        b = detail::site_from(nb, k, b.extent(2));
    }

    void move_center_left(Index i) {
        auto& a = sites_.at(i - 1);
        auto& b = sites_.at(i);
        const Index dr = b.extent(2);
        auto qr = detail::thin_qr(b.matrix(1).adjoint());
        const Index k = static_cast<Index>(qr.Q.cols());
        b = detail::site_from(qr.Q.adjoint(), k, dr);
        const Matrix na = a.matrix(2) * qr.R.adjoint();
        a = detail::site_from(na, a.extent(0), k);
    }

    // Brings the state into mixed canonical form with the given center.
    MatrixProductState& canonicalize(Index c) {
        if (c >= sites_.size()) throw ArgumentError("canonical center out of range");
        if (!center_) {
            for (Index i = 0; i < c; ++i) move_center_right(i);
            for (Index i = sites_.size() - 1; i > c; --i) move_center_left(i);
        } else {
            for (Index i = *center_; i < c; ++i) move_center_right(i);
            for (Index i = *center_; i > c; --i) move_center_left(i);
        }
        center_ = c;
        return *this;
    }

    // Moves the tensor norm into log_norm_adjust so the tensors describe a
    // unit vector. Requires (and establishes) a canonical center.
    double normalize() {
        if (!center_) canonicalize(0);
        auto& c = sites_[*center_];
        const double n = c.norm();
        if (n == 0.0) throw DomainError("cannot normalize a zero state");
        c *= cplx{1.0 / n};
        log_norm_ += std::log(n);
        return n;
    }

    // Folds log_norm_adjust back into the tensors (center site, or site 0).
    void absorb_log_norm() {
        if (log_norm_ == 0.0) return;
        sites_[center_.value_or(0)] *= cplx{std::exp(log_norm_)};
        log_norm_ = 0.0;
    }

  private:
    std::vector<DenseTensor> sites_;
    std::optional<Index> center_;
    double log_norm_ = 0.0;
};

inline MatrixProductState from_product_state(std::span<const int> bits) {
    if (bits.empty()) throw ArgumentError("product state needs at least one bit");
    std::vector<DenseTensor> sites;
    sites.reserve(bits.size());
    for (int b : bits) {
        if (b != 0 && b != 1) throw ArgumentError("product-state bits must be 0 or 1");
        DenseTensor t({1, kPhysicalDim, 1});
        t(0, b, 0) = 1.0;
        sites.push_back(std::move(t));
    }
    return MatrixProductState(std::move(sites), 0);
}

inline MatrixProductState from_product_state(std::initializer_list<int> bits) {
    return from_product_state(std::span<const int>(bits.begin(), bits.size()));
}

// (|11..1> + |00..0>)/sqrt(2)
inline MatrixProductState ghz_state(Index n) {
    if (n < 1) throw ArgumentError("GHZ state needs at least one site");
    const double amp = 1.0 / std::sqrt(2.0);
    std::vector<DenseTensor> sites;
    if (n == 1) {
        DenseTensor t({1, 2, 1});
        t(0, 0, 0) = amp;
        t(0, 1, 0) = amp;
        sites.push_back(std::move(t));
        return MatrixProductState(std::move(sites), 0);
    }
    DenseTensor first({1, 2, 2});
    first(0, 0, 0) = amp;
    first(0, 1, 1) = amp;
    sites.push_back(std::move(first));
    for (Index i = 1; i + 1 < n; ++i) {
        DenseTensor mid({2, 2, 2});
        mid(0, 0, 0) = 1.0;
        mid(1, 1, 1) = 1.0;
        sites.push_back(std::move(mid));
    }
    DenseTensor last({2, 2, 1});
    last(0, 0, 0) = 1.0;
    last(1, 1, 0) = 1.0;
    sites.push_back(std::move(last));
    return MatrixProductState(std::move(sites), 0);
}

// <a|b>, including both log-norm adjustments.
inline cplx overlap(const MatrixProductState& a, const MatrixProductState& b) {
    if (a.length() != b.length()) throw ArgumentError("overlap of states with different lengths");
    Matrix env = Matrix::Ones(1, 1);
    for (Index i = 0; i < a.length(); ++i) env = detail::transfer_left(env, a.site(i), b.site(i));
    return env(0, 0) * std::exp(a.log_norm_adjust() + b.log_norm_adjust());
}

inline double norm_squared(const MatrixProductState& s) { return std::real(overlap(s, s)); }

inline MatrixProductState canonicalize(MatrixProductState state, Index center) {
    state.canonicalize(center);
    return state;
}

// Left/right transfer environments of <psi|psi>, built once and reused for
// every local expectation value of one state.
class ExpectationCache {
  public:
    explicit ExpectationCache(const MatrixProductState& psi) : psi_(&psi) {
        const Index n = psi.length();
        left_.resize(n + 1);
        right_.resize(n + 1);
        left_[0] = Matrix::Ones(1, 1);
        for (Index i = 0; i < n; ++i) left_[i + 1] = detail::transfer_left(left_[i], psi.site(i), psi.site(i));
        right_[n] = Matrix::Ones(1, 1);
        for (Index i = n; i-- > 0;) right_[i] = detail::transfer_right(right_[i + 1], psi.site(i), psi.site(i));
        norm2_ = std::real(left_[n](0, 0));
    }

    // Squared norm of the tensor network (without log_norm_adjust).
    double tensor_norm_squared() const { return norm2_; }

    cplx one_site(const pauli::Op& op, Index i) const {
        check_site(i);
        const auto& a = psi_->site(i);
        cplx acc = 0.0;
        for (Index s = 0; s < 2; ++s)
            for (Index t = 0; t < 2; ++t) {
                const cplx o = op(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
                if (o == cplx{0.0}) continue;
                const Matrix x = detail::site_slice(a, s).adjoint() * left_[i] * detail::site_slice(a, t);
                acc += o * (x.cwiseProduct(right_[i + 1])).sum();
            }
        return acc / norm2_;
    }

    cplx two_site(const pauli::Op& op_a, const pauli::Op& op_b, Index i) const {
        check_site(i);
        check_site(i + 1);
        const auto& a = psi_->site(i);
        const auto& b = psi_->site(i + 1);
        Matrix mid = Matrix::Zero(static_cast<Eigen::Index>(a.extent(2)), static_cast<Eigen::Index>(a.extent(2)));
        for (Index s = 0; s < 2; ++s)
            for (Index t = 0; t < 2; ++t) {
                const cplx o = op_a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
                if (o == cplx{0.0}) continue;
                mid.noalias() += o * (detail::site_slice(a, s).adjoint() * left_[i] * detail::site_slice(a, t));
            }
        cplx acc = 0.0;
        for (Index s = 0; s < 2; ++s)
            for (Index t = 0; t < 2; ++t) {
                const cplx o = op_b(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
                if (o == cplx{0.0}) continue;
                const Matrix x = detail::site_slice(b, s).adjoint() * mid * detail::site_slice(b, t);
                acc += o * (x.cwiseProduct(right_[i + 2])).sum();
            }
        return acc / norm2_;
    }

  private:
    void check_site(Index i) const {
        if (i >= psi_->length()) throw ArgumentError("site " + std::to_string(i) + " out of range");
    }

    const MatrixProductState* psi_;
    std::vector<Matrix> left_, right_;
    double norm2_ = 0.0;
};

inline double expect_one_site(const MatrixProductState& psi, const pauli::Op& op, Index i) {
    if (i >= psi.length()) throw ArgumentError("site " + std::to_string(i) + " out of range");
    return std::real(ExpectationCache(psi).one_site(op, i));
}

inline cplx expect_two_site(const MatrixProductState& psi, const pauli::Op& op_a, const pauli::Op& op_b, Index i) {
    if (i + 1 >= psi.length()) throw ArgumentError("bond " + std::to_string(i) + " out of range");
    return ExpectationCache(psi).two_site(op_a, op_b, i);
}

// Applies a two-site gate (shape (2,2,2,2) or (4,4), rows = outgoing
// (s1, s2)) to sites (bond, bond+1), truncating the new bond. Singular values
// are absorbed away from the incoming center, so a run of gates sweeps in
// the direction it started. Returns the relative discarded weight.
inline double apply_two_site_gate(MatrixProductState& psi, const DenseTensor& gate, Index bond, Index max_D,
                                  double weight_tol) {
    if (bond + 1 >= psi.length()) throw ArgumentError("bond " + std::to_string(bond) + " out of range");
    if (gate.size() != 16) throw DimensionError("two-site gate must have 16 entries, got shape " +
                                                shape_string(gate.shape()));
    if (!psi.ortho_center()) psi.canonicalize(bond);
    Index c = *psi.ortho_center();
    if (c < bond) {
        psi.canonicalize(bond);
        c = bond;
    } else if (c > bond + 1) {
        psi.canonicalize(bond + 1);
        c = bond + 1;
    }
    const bool absorb_right = (c == bond);

    const auto& a = psi.site(bond);
    const auto& b = psi.site(bond + 1);
    const Index dl = a.extent(0), dr = b.extent(2);
    RowMatrix theta = a.matrix(2) * b.matrix(1);  // (dl*2) x (2*dr) == (dl, s1, s2, dr)
    Eigen::Map<const RowMatrix> g(gate.raw(), 4, 4);
    {
        RowMatrix block(4, static_cast<Eigen::Index>(dr));
        for (Index l = 0; l < dl; ++l) {
            Eigen::Map<RowMatrix> t(theta.data() + l * 4 * dr, 4, static_cast<Eigen::Index>(dr));
            block.noalias() = g * t;
            t = block;
        }
    }
    Eigen::Map<const RowMatrix> theta_m(theta.data(), static_cast<Eigen::Index>(2 * dl),
                                        static_cast<Eigen::Index>(2 * dr));
    auto svd = detail::truncated_svd(theta_m, max_D, weight_tol);
    const Index k = static_cast<Index>(svd.S.size());
    if (absorb_right) {
        psi.set_site(bond, detail::site_from(svd.U, dl, k));
        psi.set_site(bond + 1, detail::site_from(svd.S.asDiagonal() * svd.V, k, dr));
        psi.set_ortho_center(bond + 1);
    } else {
        psi.set_site(bond, detail::site_from(svd.U * svd.S.asDiagonal(), dl, k));
        psi.set_site(bond + 1, detail::site_from(svd.V, k, dr));
        psi.set_ortho_center(bond);
    }
    return svd.discarded_weight;
}

struct ReducedDensityMatrix {
    Index first_site = 0;
    Index site_count = 0;
    Matrix matrix;  // row index: first site most significant
};

constexpr Index kDefaultRdmCap = 12;

inline ReducedDensityMatrix reduced_density_matrix(const MatrixProductState& psi, Index first, Index count,
                                                   Index cap = kDefaultRdmCap) {
    if (count == 0 || first + count > psi.length()) throw ArgumentError("RDM site range out of bounds");
    if (count > cap)
        throw CapacityError("RDM range of " + std::to_string(count) + " sites exceeds the cap of " +
                            std::to_string(cap) + " sites");
    MatrixProductState s = psi;
    s.canonicalize(first);
    // Block over the range: (dl, 2^count, dr) in row-major.
    RowMatrix block = s.site(first).matrix(2);  // (dl*2) x d
    for (Index i = first + 1; i < first + count; ++i) {
        const RowMatrix next = block * s.site(i).matrix(1);
        block = Eigen::Map<const RowMatrix>(next.data(), next.rows() * 2, next.cols() / 2);
    }
    const Index dl = s.site(first).extent(0);
    const Index dr = s.site(first + count - 1).extent(2);
    const Index dim = Index{1} << count;
    // X[p, (l, r)] from block[(l, p), r]
    Matrix x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dl * dr));
    for (Index l = 0; l < dl; ++l)
        for (Index p = 0; p < dim; ++p)
            for (Index r = 0; r < dr; ++r)
                x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(l * dr + r)) =
                    block(static_cast<Eigen::Index>(l * dim + p), static_cast<Eigen::Index>(r));
    ReducedDensityMatrix rdm;
    rdm.first_site = first;
    rdm.site_count = count;
    rdm.matrix = x * x.adjoint();
    const double tr = std::real(rdm.matrix.trace());
    if (!(tr > 0.0)) throw DomainError("RDM of a zero state");
    rdm.matrix /= tr;
    rdm.matrix = 0.5 * (rdm.matrix + rdm.matrix.adjoint()).eval();
    return rdm;
}

} // namespace xxzb
