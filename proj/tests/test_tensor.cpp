#include "random_fixtures.hpp"

#include <xxzb/tensor.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace xxzb;
using xxzb::testing::random_hermitian;
using xxzb::testing::random_tensor;

TEST(Contract, IdentityOnBasisVector) {
    const auto id = DenseTensor::identity(2);
    const DenseTensor v({2}, {1.0, 0.0});
    const auto r = contract(id, v, {{1, 0}});
    ASSERT_EQ(r.shape(), Shape({2}));
    EXPECT_EQ(r(0), cplx(1.0));
    EXPECT_EQ(r(1), cplx(0.0));
}

TEST(Contract, FullContractionIsUnconjugatedDot) {
    const DenseTensor u({3}, {cplx{1, 2}, cplx{0, -1}, cplx{3, 0}});
    const DenseTensor v({3}, {cplx{2, 0}, cplx{1, 1}, cplx{-1, 4}});
    const auto r = contract(u, v, {{0, 0}});
    EXPECT_EQ(r.rank(), 0u);
    const cplx expected = u(0) * v(0) + u(1) * v(1) + u(2) * v(2);
    EXPECT_NEAR(std::abs(r.data()[0] - expected), 0.0, 1e-14);
}

TEST(Contract, MatchesNaiveTripleLoop) {
    std::mt19937_64 rng(11);
    const auto a = random_tensor({3, 4}, rng);
    const auto b = random_tensor({4, 5}, rng);
    const auto r = contract(a, b, {{1, 0}});
    ASSERT_EQ(r.shape(), Shape({3, 5}));
    for (Index i = 0; i < 3; ++i)
        for (Index k = 0; k < 5; ++k) {
            cplx s = 0.0;
            for (Index j = 0; j < 4; ++j) s += a(i, j) * b(j, k);
            EXPECT_NEAR(std::abs(r(i, k) - s), 0.0, 1e-12);
        }
}

TEST(Contract, ResultAxisOrderAndHigherRank) {
    std::mt19937_64 rng(3);
    const auto a = random_tensor({2, 3, 4}, rng);
    const auto b = random_tensor({4, 5, 2}, rng);
    const auto r = contract(a, b, {{2, 0}, {0, 2}});
    ASSERT_EQ(r.shape(), Shape({3, 5}));
    for (Index j = 0; j < 3; ++j)
        for (Index m = 0; m < 5; ++m) {
            cplx s = 0.0;
            for (Index i = 0; i < 2; ++i)
                for (Index k = 0; k < 4; ++k) s += a(i, j, k) * b(k, m, i);
            EXPECT_NEAR(std::abs(r(j, m) - s), 0.0, 1e-12);
        }
}

TEST(Contract, Errors) {
    const DenseTensor a({2, 3}), b({3, 2});
    EXPECT_THROW(contract(a, b, {{0, 1}, {0, 0}}), ArgumentError);
    EXPECT_THROW(contract(a, b, {{1, 1}}), DimensionError);
    EXPECT_THROW(contract(a, b, {{5, 0}}), ArgumentError);
}

TEST(Contract, BilinearInFirstArgument) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_tensor({3, 2, 4}, rng);
        const auto b = random_tensor({4, 2, 3}, rng);
        const cplx alpha{std::normal_distribution<double>()(rng), std::normal_distribution<double>()(rng)};
        const auto lhs = contract(alpha * a, b, {{2, 0}, {1, 1}});
        const auto rhs = alpha * contract(a, b, {{2, 0}, {1, 1}});
        EXPECT_LT((lhs - rhs).norm(), 1e-12 * std::max(1.0, rhs.norm()));
    }
}

TEST(Tensor, PermutationRoundTrip) {
    std::mt19937_64 rng(9);
    const auto t = random_tensor({2, 3, 4, 5}, rng);
    const auto p = t.permuted({2, 0, 3, 1});
    ASSERT_EQ(p.shape(), Shape({4, 2, 5, 3}));
    EXPECT_EQ(p(3, 1, 4, 2), t(1, 2, 3, 4));
    EXPECT_EQ(p.permuted({1, 3, 0, 2}), t);
}

TEST(Tensor, RowMajorLayout) {
    DenseTensor t({2, 3});
    t(1, 2) = 7.0;
    EXPECT_EQ(t.data()[5], cplx(7.0));
    EXPECT_THROW(DenseTensor({2, 0}), DimensionError);
    EXPECT_THROW(t.reshaped({4}), DimensionError);
}

TEST(Svd, IdentityKeepsEverything) {
    const auto r = svd_truncate(DenseTensor::identity(4), 4, 0.0);
    ASSERT_EQ(r.S.size(), 4u);
    for (double s : r.S) EXPECT_NEAR(s, 1.0, 1e-14);
    EXPECT_EQ(r.discarded_weight, 0.0);
}

TEST(Svd, RankOne) {
    const Eigen::Vector3cd u(1.0, 2.0, cplx{0, 1});
    const Eigen::Vector4cd v(cplx{1, 1}, 0.0, 3.0, -1.0);
    const Matrix m = u * v.transpose();
    const auto r = svd_truncate(DenseTensor::from_matrix(m), 1, 0.0);
    ASSERT_EQ(r.S.size(), 1u);
    EXPECT_NEAR(r.S[0], u.norm() * v.norm(), 1e-12);
    EXPECT_NEAR(r.discarded_weight, 0.0, 1e-15);
}

TEST(Svd, RandomTruncationMatchesDroppedSpectrum) {
    std::mt19937_64 rng(21);
    const auto m = random_tensor({8, 8}, rng);
    // Reference spectrum from an independent full factorization.
    Eigen::JacobiSVD<Matrix> full(Matrix(m.matrix(1)));
    const auto sv = full.singularValues();
    double dropped = 0.0;
    for (int i = 3; i < 8; ++i) dropped += sv(i) * sv(i);
    const auto r = svd_truncate(m, 3, 0.0);
    ASSERT_EQ(r.S.size(), 3u);
    const Matrix rec = r.U.matrix(1) * Eigen::Map<const Eigen::VectorXd>(r.S.data(), 3).asDiagonal() * r.V.matrix(1);
    const double err = (Matrix(m.matrix(1)) - rec).squaredNorm();
    EXPECT_NEAR(err, dropped, 1e-10 * m.norm() * m.norm());
    EXPECT_NEAR(r.discarded_weight, dropped / sv.squaredNorm(), 1e-12);
}

TEST(Svd, InvariantsOnRandomMatrices) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> ext(1, 12);
    for (int trial = 0; trial < 40; ++trial) {
        const Index rows = ext(rng), cols = ext(rng);
        const auto m = random_tensor({rows, cols}, rng);
        const Index max_rank = std::uniform_int_distribution<Index>(1, std::min(rows, cols))(rng);
        const double tol = trial % 3 == 0 ? 0.05 : 0.0;
        const auto r = svd_truncate(m, max_rank, tol);
        const Index k = r.S.size();
        ASSERT_LE(k, max_rank);
        for (Index i = 0; i + 1 < k; ++i) EXPECT_GE(r.S[i], r.S[i + 1]);
        for (double s : r.S) EXPECT_GE(s, 0.0);
        const Matrix u = r.U.matrix(1), v = r.V.matrix(1);
        EXPECT_LT((u.adjoint() * u - Matrix::Identity(k, k)).norm(), 1e-10);
        EXPECT_LT((v * v.adjoint() - Matrix::Identity(k, k)).norm(), 1e-10);
        const Matrix rec = u * Eigen::Map<const Eigen::VectorXd>(r.S.data(), k).asDiagonal() * v;
        const double rel = (Matrix(m.matrix(1)) - rec).squaredNorm() / m.matrix(1).squaredNorm();
        EXPECT_NEAR(rel, r.discarded_weight, 1e-10);
        EXPECT_GE(r.discarded_weight, 0.0);
        EXPECT_LE(r.discarded_weight, std::max(tol, 1.0));
        if (tol > 0.0 && k < max_rank) {
            EXPECT_LE(r.discarded_weight, tol);
        }
    }
}

TEST(Svd, WeightToleranceIsScaleInvariant) {
    std::mt19937_64 rng(8);
    const auto m = random_tensor({10, 10}, rng);
    const auto a = svd_truncate(m, 10, 0.1);
    const auto b = svd_truncate(cplx{1e6} * m, 10, 0.1);
    EXPECT_EQ(a.S.size(), b.S.size());
    EXPECT_NEAR(a.discarded_weight, b.discarded_weight, 1e-12);
}

TEST(Svd, DegenerateValuesSplitAtMaxRank) {
    const auto r = svd_truncate(DenseTensor::identity(4), 2, 0.0);
    ASSERT_EQ(r.S.size(), 2u);
    EXPECT_NEAR(r.discarded_weight, 0.5, 1e-14);
}

TEST(Svd, RejectsNonFinite) {
    DenseTensor m({2, 2});
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(svd_truncate(m, 2, 0.0), DecompositionError);
}

TEST(GateExponential, ZeroGeneratorIsIdentity) {
    const auto g = hermitian_gate_exponential(DenseTensor({4, 4}), cplx{0.0, -0.3});
    EXPECT_EQ(g, DenseTensor::identity(4));
}

TEST(GateExponential, PauliZ) {
    const DenseTensor z({2, 2}, {1.0, 0.0, 0.0, -1.0});
    const double t = 0.7;
    const auto g = hermitian_gate_exponential(z, cplx{0.0, -t});
    EXPECT_NEAR(std::abs(g(0, 0) - std::exp(cplx{0.0, -t})), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(g(1, 1) - std::exp(cplx{0.0, t})), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(g(0, 1)), 0.0, 1e-15);
}

TEST(GateExponential, RandomHermitianAgainstTaylorSeries) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix h = random_hermitian(4, rng);
        const cplx pre{0.0, -0.1};
        const auto g = hermitian_gate_exponential(DenseTensor::from_matrix(h), pre);
        const Matrix gm = g.matrix(1);
        EXPECT_LT((gm.adjoint() * gm - Matrix::Identity(4, 4)).norm(), 1e-10);
        // Taylor series of exp(pre h) with scaling and squaring by 2^4.
        const Matrix a = (pre / 16.0) * h;
        Matrix term = Matrix::Identity(4, 4), sum = Matrix::Identity(4, 4);
        for (int k = 1; k < 25; ++k) {
            term = term * a / static_cast<double>(k);
            sum += term;
        }
        for (int k = 0; k < 4; ++k) sum = sum * sum;
        EXPECT_LT((gm - sum).norm(), 1e-9);
    }
}

TEST(GateExponential, RejectsNonHermitian) {
    DenseTensor h({2, 2});
    h(0, 1) = 1.0;
    EXPECT_THROW(hermitian_gate_exponential(h, cplx{0.0, -1.0}), ArgumentError);
}
