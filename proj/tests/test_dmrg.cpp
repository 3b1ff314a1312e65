#include "random_fixtures.hpp"

#include <xxzb/dmrg.hpp>
#include <xxzb/oracle.hpp>
#include <xxzb/tebd.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace xxzb;
using xxzb::testing::random_mps;

TEST(Mpo, ExpectationMatchesDenseHamiltonian) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        Couplings c;
        for (int k = 0; k < 5; ++k) c.push_back({u(rng), u(rng)});
        auto psi = random_mps(6, 4, rng);
        psi.set_log_norm_adjust(0.7);
        const auto ds = oracle::from_mps(psi);
        EXPECT_NEAR(std::real(mpo_expectation(psi, xxz_mpo(c))), oracle::energy(ds, c), 1e-10);
        const Vector hv = oracle::apply_hamiltonian(c, ds.amplitudes);
        const double n2 = ds.amplitudes.squaredNorm();
        const double e = std::real(ds.amplitudes.dot(hv)) / n2;
        EXPECT_NEAR(energy_variance(psi, xxz_mpo(c)), hv.squaredNorm() / n2 - e * e, 1e-9);
    }
}

TEST(Dmrg, TwoSiteSinglet) {
    for (double Jz : {0.0, 0.5, 1.0, 2.5}) {
        const double J = 1.0;
        const auto g = dmrg_ground_state(2, J, Jz);
        EXPECT_NEAR(g.energy, -2.0 * J - Jz, 1e-10) << "Jz = " << Jz;
        const auto v = oracle::from_mps(g.state).amplitudes;
        Vector singlet = Vector::Zero(4);
        singlet(1) = 1.0 / std::sqrt(2.0);
        singlet(2) = -1.0 / std::sqrt(2.0);
        EXPECT_NEAR(std::norm(singlet.dot(v)) / v.squaredNorm(), 1.0, 1e-10);
    }
    EXPECT_NEAR(dmrg_ground_state(2, 1.7, 0.0).energy, -3.4, 1e-10);
}

TEST(Dmrg, MatchesExactDiagonalization) {
    for (int N : {4, 6, 8}) {
        for (double Jz : {0.0, 0.5, 1.0, 1.5}) {
            const auto c = uniform_couplings(N, 1.0, Jz);
            const auto g = dmrg_ground_state(c);
            const auto ed = oracle::exact_ground_state(c);
            EXPECT_NEAR(g.energy, ed.energy, 1e-8) << "N = " << N << ", Jz = " << Jz;
            EXPECT_GE(g.energy, ed.energy - 1e-9);
            EXPECT_GE(g.variance, -1e-8);
            EXPECT_LT(g.variance, 1e-6);
            EXPECT_LT(std::abs(g.total_magnetization), 1e-6);
        }
    }
}

TEST(Dmrg, SweepEnergiesNonIncreasing) {
    DmrgOptions opt;
    opt.max_D = 16;
    const auto g = dmrg_ground_state(10, 1.0, 0.8, opt);
    ASSERT_GE(g.sweep_energies.size(), 2u);
    for (std::size_t i = 1; i < g.sweep_energies.size(); ++i)
        EXPECT_LE(g.sweep_energies[i], g.sweep_energies[i - 1] + 1e-10);
    EXPECT_EQ(g.sweeps_used, static_cast<int>(g.sweep_energies.size()));
}

TEST(Dmrg, GroundStateIsRealAndCarriesNoCurrent) {
    const auto c = uniform_couplings(8, 1.0, 0.5);
    const auto g = dmrg_ground_state(c);
    auto v = oracle::from_mps(g.state).amplitudes;
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    v *= std::conj(v(big)) / std::abs(v(big));
    EXPECT_LT(v.imag().cwiseAbs().maxCoeff(), 1e-8);
    const auto p = measure_profile(g.state, c);
    for (double q : p.q) EXPECT_NEAR(q, 0.0, 1e-8);
}

TEST(Dmrg, Errors) {
    EXPECT_THROW(dmrg_ground_state(3, 1.0, 0.0), ArgumentError);
    EXPECT_THROW(dmrg_ground_state(1, 1.0, 0.0), ArgumentError);
}

TEST(Dmrg, NeelSeed) {
    EXPECT_EQ(neel_bits(4), (std::vector<int>{1, 0, 1, 0}));
}
