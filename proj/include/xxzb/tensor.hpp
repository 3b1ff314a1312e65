#pragma once

// Dense complex tensors. Storage is row-major: the last index runs fastest.
// Checkpoints and every reshape in the library rely on this layout.

#include <xxzb/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace xxzb {

using cplx = std::complex<double>;
using Index = std::size_t;
using Shape = std::vector<Index>;

using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline Index shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (Index i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

class DenseTensor {
  public:
    DenseTensor() : data_(1, cplx{0.0}) {}

    explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
        check_extents();
        data_.assign(shape_volume(shape_), cplx{0.0});
    }

    DenseTensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != shape_volume(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
    }

    static DenseTensor scalar(cplx value) {
        DenseTensor t;
        t.data_[0] = value;
        return t;
    }

    static DenseTensor identity(Index n) {
        DenseTensor t({n, n});
        for (Index i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    template <typename Derived>
    static DenseTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
        DenseTensor t({static_cast<Index>(m.rows()), static_cast<Index>(m.cols())});
        Eigen::Map<RowMatrix>(t.data_.data(), m.rows(), m.cols()) = m;
        return t;
    }

    Index rank() const noexcept { return shape_.size(); }
    const Shape& shape() const noexcept { return shape_; }
    Index extent(Index axis) const { return shape_.at(axis); }
    Index size() const noexcept { return data_.size(); }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }
    cplx* raw() noexcept { return data_.data(); }
    const cplx* raw() const noexcept { return data_.data(); }

    Index offset(std::span<const Index> idx) const {
        if (idx.size() != shape_.size()) throw ArgumentError("index rank mismatch");
        Index off = 0;
        for (Index a = 0; a < idx.size(); ++a) {
            if (idx[a] >= shape_[a]) throw ArgumentError("index out of range on axis " + std::to_string(a));
            off = off * shape_[a] + idx[a];
        }
        return off;
    }

    template <typename... I>
    cplx& operator()(I... i) {
        const Index idx[] = {static_cast<Index>(i)...};
        return data_[offset(idx)];
    }
    template <typename... I>
    const cplx& operator()(I... i) const {
        const Index idx[] = {static_cast<Index>(i)...};
        return data_[offset(idx)];
    }

    DenseTensor reshaped(Shape shape) const {
        if (shape_volume(shape) != data_.size())
            throw DimensionError("cannot reshape " + shape_string(shape_) + " into " + shape_string(shape));
        return DenseTensor(std::move(shape), data_);
    }

    DenseTensor permuted(std::span<const Index> perm) const;
    DenseTensor permuted(std::initializer_list<Index> perm) const {
        return permuted(std::span<const Index>(perm.begin(), perm.size()));
    }

    DenseTensor conj() const {
        DenseTensor t = *this;
        for (auto& v : t.data_) v = std::conj(v);
        return t;
    }

    double norm() const {
        double s = 0.0;
        for (const auto& v : data_) s += std::norm(v);
        return std::sqrt(s);
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
    }

    DenseTensor& operator*=(cplx s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend DenseTensor operator*(cplx s, DenseTensor t) { return t *= s; }

    DenseTensor& operator+=(const DenseTensor& o) {
        if (o.shape_ != shape_) throw DimensionError("shape mismatch in tensor sum");
        for (Index i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
    friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a += cplx{-1.0} * b; }

    // Row-major matrix view with the first `row_axes` axes fused into rows.
    Eigen::Map<RowMatrix> matrix(Index row_axes) {
        auto [r, c] = split(row_axes);
        return {data_.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
    }
    Eigen::Map<const RowMatrix> matrix(Index row_axes) const {
        auto [r, c] = split(row_axes);
        return {data_.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
    }

    bool operator==(const DenseTensor&) const = default;

  private:
    void check_extents() const {
        for (Index e : shape_)
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
    }

    std::pair<Index, Index> split(Index row_axes) const {
        if (row_axes > shape_.size()) throw ArgumentError("matrix split beyond tensor rank");
        Index r = 1;
        for (Index a = 0; a < row_axes; ++a) r *= shape_[a];
        return {r, data_.size() / r};
    }

    Shape shape_;
    std::vector<cplx> data_;
};

inline DenseTensor DenseTensor::permuted(std::span<const Index> perm) const {
    const Index n = rank();
    if (perm.size() != n) throw ArgumentError("permutation rank mismatch");
    std::vector<bool> seen(n, false);
    for (Index p : perm) {
        if (p >= n || seen[p]) throw ArgumentError("invalid permutation");
        seen[p] = true;
    }
    Shape out_shape(n);
    for (Index a = 0; a < n; ++a) out_shape[a] = shape_[perm[a]];
    if (std::is_sorted(perm.begin(), perm.end())) return *this;

    // Strides of the source, in the order of the destination axes.
    std::vector<Index> src_stride(n);
    {
        std::vector<Index> stride(n, 1);
        for (Index a = n; a-- > 1;) stride[a - 1] = stride[a] * shape_[a];
        for (Index a = 0; a < n; ++a) src_stride[a] = stride[perm[a]];
    }
    DenseTensor out(out_shape);
    std::vector<Index> counter(n, 0);
    Index src = 0;
    const Index last = n - 1;
    const Index inner = out_shape[last];
    const Index inner_stride = src_stride[last];
    for (Index dst = 0; dst < out.data_.size(); dst += inner) {
        const cplx* s = data_.data() + src;
        cplx* d = out.data_.data() + dst;
        for (Index k = 0; k < inner; ++k) d[k] = s[k * inner_stride];
        // Odometer over all but the last destination axis.
        for (Index a = last; a-- > 0;) {
            if (++counter[a] < out_shape[a]) {
                src += src_stride[a];
                break;
            }
            src -= src_stride[a] * (out_shape[a] - 1);
            counter[a] = 0;
        }
    }
    return out;
}

// Sum over paired axes. Result axes: unpaired axes of `a` in order, then
// unpaired axes of `b` in order.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            std::span<const std::pair<Index, Index>> pairs) {
    std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
    for (auto [ia, ib] : pairs) {
        if (ia >= a.rank() || ib >= b.rank()) throw ArgumentError("contraction index beyond tensor rank");
        if (used_a[ia] || used_b[ib]) throw ArgumentError("index paired twice in contraction");
        used_a[ia] = used_b[ib] = true;
        if (a.extent(ia) != b.extent(ib))
            throw DimensionError("paired extents differ: " + std::to_string(a.extent(ia)) + " vs " +
                                 std::to_string(b.extent(ib)));
    }
    std::vector<Index> perm_a, perm_b;
    Shape out_shape;
    Index free_a = 1, free_b = 1, inner = 1;
    for (Index i = 0; i < a.rank(); ++i)
        if (!used_a[i]) {
            perm_a.push_back(i);
            out_shape.push_back(a.extent(i));
            free_a *= a.extent(i);
        }
    for (auto [ia, ib] : pairs) {
        perm_a.push_back(ia);
        perm_b.push_back(ib);
        inner *= a.extent(ia);
    }
    for (Index i = 0; i < b.rank(); ++i)
        if (!used_b[i]) {
            perm_b.push_back(i);
            out_shape.push_back(b.extent(i));
            free_b *= b.extent(i);
        }
    const DenseTensor pa = a.permuted(perm_a);
    const DenseTensor pb = b.permuted(perm_b);
    Eigen::Map<const RowMatrix> ma(pa.raw(), free_a, inner);
    Eigen::Map<const RowMatrix> mb(pb.raw(), inner, free_b);
    DenseTensor out = out_shape.empty() ? DenseTensor() : DenseTensor(out_shape);
    Eigen::Map<RowMatrix>(out.raw(), free_a, free_b).noalias() = ma * mb;
    return out;
}

inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            std::initializer_list<std::pair<Index, Index>> pairs) {
    return contract(a, b, std::span<const std::pair<Index, Index>>(pairs.begin(), pairs.size()));
}

struct TruncatedSVD {
    DenseTensor U;  // m x k, orthonormal columns
    std::vector<double> S;
    DenseTensor V;  // k x n, orthonormal rows
    double discarded_weight = 0.0;
};

namespace detail {

struct MatrixSVD {
    Matrix U;
    Eigen::VectorXd S;
    Matrix V;  // rows are right singular vectors (already adjointed)
    double discarded_weight = 0.0;
};

// Number of singular values to keep: the smallest k whose relative discarded
// weight is within tolerance, capped at max_rank. At least one is kept.
inline Index truncation_rank(const Eigen::VectorXd& s, Index max_rank, double weight_tol, double* discarded) {
    const Index n = static_cast<Index>(s.size());
    double total = s.squaredNorm();
    Index k = n;
    if (total > 0.0) {
        // tail[j] = sum_{i >= j} s_i^2
        double tail = 0.0;
        k = n;
        for (Index j = n; j-- > 1;) {
            tail += s(static_cast<Eigen::Index>(j)) * s(static_cast<Eigen::Index>(j));
            if (tail / total <= weight_tol)
                k = j;
            else
                break;
        }
    } else {
        k = 1;
    }
    k = std::max<Index>(1, std::min(k, max_rank));
    double dropped = 0.0;
    for (Index j = k; j < n; ++j) dropped += s(static_cast<Eigen::Index>(j)) * s(static_cast<Eigen::Index>(j));
    *discarded = total > 0.0 ? std::clamp(dropped / total, 0.0, 1.0) : 0.0;
    return k;
}

template <typename Derived>
MatrixSVD truncated_svd(const Eigen::MatrixBase<Derived>& m, Index max_rank, double weight_tol) {
    if (max_rank < 1) throw ArgumentError("max_rank must be positive");
    if (weight_tol < 0.0) throw ArgumentError("weight_tol must be non-negative");
    if (!m.allFinite()) throw DecompositionError("SVD input contains non-finite values");
    Matrix full_u, full_v;
    Eigen::VectorXd s;
    const auto small = std::min(m.rows(), m.cols());
    if (small <= 16) {
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw DecompositionError("Jacobi SVD failed to converge");
        full_u = svd.matrixU();
        full_v = svd.matrixV();
        s = svd.singularValues();
    } else {
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw DecompositionError("divide-and-conquer SVD failed to converge");
        full_u = svd.matrixU();
        full_v = svd.matrixV();
        s = svd.singularValues();
    }
    if (!s.allFinite() || !full_u.allFinite() || !full_v.allFinite())
        throw DecompositionError("SVD produced non-finite factors");
    MatrixSVD out;
    const Index k = truncation_rank(s, max_rank, weight_tol, &out.discarded_weight);
    const auto kk = static_cast<Eigen::Index>(k);
    out.U = full_u.leftCols(kk);
    out.S = s.head(kk);
    out.V = full_v.leftCols(kk).adjoint();
    return out;
}

} // namespace detail

// Truncated singular value decomposition of a rank-2 tensor.
inline TruncatedSVD svd_truncate(const DenseTensor& m, Index max_rank, double weight_tol) {
    if (m.rank() != 2) throw DimensionError("svd_truncate expects a rank-2 tensor");
    auto r = detail::truncated_svd(m.matrix(1), max_rank, weight_tol);
    TruncatedSVD out;
    out.U = DenseTensor::from_matrix(r.U);
    out.V = DenseTensor::from_matrix(r.V);
    out.S.assign(r.S.data(), r.S.data() + r.S.size());
    out.discarded_weight = r.discarded_weight;
    return out;
}

// exp(prefactor * h) for Hermitian h via full eigendecomposition.
inline DenseTensor hermitian_gate_exponential(const DenseTensor& h, cplx prefactor) {
    if (h.rank() != 2 || h.extent(0) != h.extent(1)) throw DimensionError("gate generator must be square");
    const auto hm = h.matrix(1);
    const double scale = std::max(hm.norm(), 1.0);
    if ((hm - hm.adjoint()).norm() > 1e-12 * scale) throw ArgumentError("gate generator is not Hermitian");
    if (!hm.allFinite()) throw ArgumentError("gate generator contains non-finite values");
    const Index n = h.extent(0);
    if (prefactor == cplx{0.0} || hm.norm() == 0.0) return DenseTensor::identity(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(hm)};
    if (eig.info() != Eigen::Success) throw DecompositionError("Hermitian eigensolver failed");
    Vector phases(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < phases.size(); ++i) phases(i) = std::exp(prefactor * eig.eigenvalues()(i));
    const Matrix g = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
    return DenseTensor::from_matrix(g);
}

} // namespace xxzb
