#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "qbif/liouvillian.hpp"
#include "qbif/trajectories.hpp"

namespace {

using namespace qbif;

DimerParams driven(int N, double U = 0.5, double gamma = 0.1) {
  DimerParams p;
  p.J = -1.0;
  p.E = 1.0;
  p.A = 1.5;
  p.T = 1.0;
  p.gamma = gamma;
  p.U = U;
  p.N = N;
  return p;
}

StateVector random_state(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  StateVector v(d);
  for (auto& x : v) x = Complex(g(rng), g(rng));
  return v.normalized();
}

TEST(Trajectories, EffectiveHamiltonianForm) {
  const auto p = driven(5);
  const auto ops = build_operators(5);
  const FockOperator heff = effective_hamiltonian(p, ops, 2.5);
  const FockOperator h = hamiltonian(p, ops, 2.5);
  EXPECT_LT((0.5 * (heff + heff.adjoint()) - h).norm(), 1e-14);
  const FockOperator anti = Complex(0, 1) * (heff - heff.adjoint());
  EXPECT_LT((anti - (p.gamma / p.N) * ops.VdV).norm(), 1e-14);
}

TEST(Trajectories, UnitaryLimitConservesNorm) {
  const auto p = driven(6, 0.5, 0.0);
  StateVector psi = random_state(7, 1);
  psi = effective_propagate(psi, 0.0, 0.5, p);
  psi = effective_propagate(psi, 0.5, 1.0, p);
  EXPECT_NEAR(psi.squaredNorm(), 1.0, 1e-10);
}

TEST(Trajectories, DarkStateOnlyGainsPhase) {
  DimerParams p;
  p.N = 10;
  p.J = 1.0;
  const auto s = symmetric_condensate(10);
  PropagateOptions fine;
  fine.max_phase_step = 0.005;
  const StateVector out = effective_propagate(s, 0.0, 2.0, p, build_operators(10), fine);
  EXPECT_NEAR(out.squaredNorm(), 1.0, 1e-12);
  const Complex phase = std::exp(Complex(0, -p.J * p.N * 2.0));
  EXPECT_LT((out - phase * s).norm(), 1e-9);
}

TEST(Trajectories, HalfPeriodMatchesMatrixExponential) {
  const auto p = driven(4);
  const auto ops = build_operators(4);
  const StateVector psi = random_state(5, 2);
  const FockOperator heff = effective_hamiltonian(p, ops, drive(p, 0.1));
  const StateVector ref = (Complex(0, -0.5) * heff).exp() * psi;
  EXPECT_LT((effective_propagate(psi, 0.0, 0.5, p) - ref).norm(), 1e-8);
  const SpectralPropagator sp(heff);
  const StateVector c = sp.coefficients(psi);
  EXPECT_LT((sp.evolve(c, 0.5) - ref).norm(), 1e-10);
  EXPECT_NEAR(sp.norm2(c, 0.5), ref.squaredNorm(), 1e-12);
  EXPECT_LT(sp.condition(), 1e6);
}

TEST(Trajectories, PropagationRefusesToCrossASwitch) {
  const auto p = driven(3);
  EXPECT_THROW(effective_propagate(random_state(4, 3), 0.2, 0.7, p), InvalidParameter);
}

TEST(Trajectories, NormNeverIncreases) {
  const auto p = driven(8);
  StateVector psi = random_state(9, 4);
  double last = psi.squaredNorm();
  for (int k = 0; k < 20; ++k) {
    psi = effective_propagate(psi, 0.05 * k, 0.05 * (k + 1), p);
    EXPECT_LE(psi.squaredNorm(), last + 1e-12);
    last = psi.squaredNorm();
  }
}

TEST(Trajectories, SameSeedSameSeries) {
  const auto p = driven(10);
  const auto psi = symmetric_condensate(10);
  const auto a = run_trajectory(psi, p, 5, 30, 77);
  const auto b = run_trajectory(psi, p, 5, 30, 77);
  ASSERT_EQ(a.values.size(), 30U);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.jumps, b.jumps);
  EXPECT_GT(a.jumps, 0);
  const auto c = run_trajectory(psi, p, 5, 30, 78);
  EXPECT_NE(a.values, c.values);
}

TEST(Trajectories, SpectralAndRungeKuttaPathsAgree) {
  const auto p = driven(12);
  const auto psi = symmetric_condensate(12);
  TrajectoryOptions rk;
  rk.force_rk4 = true;
  const auto a = run_trajectory(psi, p, 0, 10, 5);
  const auto b = run_trajectory(psi, p, 0, 10, 5, rk);
  ASSERT_EQ(a.jumps, b.jumps);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
}

TEST(Trajectories, NoJumpsWithoutDissipation) {
  const auto p = driven(6, 0.5, 0.0);
  const StateVector psi = random_state(7, 9);
  QuantumTrajectory traj(psi, p, 3);
  const auto ops = build_operators(6);
  StateVector ref = psi;
  for (int m = 1; m <= 5; ++m) {
    traj.advance_to(m * p.T);
    ref = (Complex(0, -0.5) * hamiltonian(p, ops, p.E + p.A)).exp() * ref;
    ref = (Complex(0, -0.5) * hamiltonian(p, ops, p.E)).exp() * ref;
    EXPECT_NEAR(traj.expectation_n1(), ref.dot(ops.n1 * ref).real(), 1e-8);
  }
  EXPECT_EQ(traj.jumps(), 0);
}

TEST(Trajectories, RejectsBadInputs) {
  const auto p = driven(4);
  EXPECT_THROW(QuantumTrajectory(StateVector::Ones(5), p, 1), InvalidParameter);
  EXPECT_THROW(QuantumTrajectory(random_state(3, 1), p, 1), DimensionMismatch);
  QuantumTrajectory t(random_state(5, 1), p, 1);
  t.advance_to(1.0);
  EXPECT_THROW(t.advance_to(0.5), InvalidParameter);
  EXPECT_THROW(ensemble_expectation(p, random_state(5, 1), 1, {1.0}, 1), InvalidParameter);
}

TEST(Trajectories, SeedsAreDistinctAndReproducible) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(trajectory_seed(42, k));
  EXPECT_EQ(seen.size(), 1000U);
  EXPECT_EQ(trajectory_seed(42, 7), trajectory_seed(42, 7));
  EXPECT_NE(trajectory_seed(42, 0), trajectory_seed(43, 0));
}

TEST(Trajectories, DarkStateEnsembleIsConstant) {
  DimerParams p;
  p.N = 8;
  const auto ens = ensemble_expectation(p, symmetric_condensate(8), 4, {0.5, 1.0, 3.0}, 1);
  for (std::size_t i = 0; i < ens.times.size(); ++i) {
    EXPECT_NEAR(ens.mean[i], 4.0, 1e-10);
    EXPECT_NEAR(ens.std_error[i], 0.0, 1e-10);
  }
}

TEST(Trajectories, EnsembleIndependentOfWorkerCount) {
  const auto p = driven(5);
  const auto a = ensemble_expectation(p, symmetric_condensate(5), 6, {1.0, 2.0}, 3, 1);
  const auto b = ensemble_expectation(p, symmetric_condensate(5), 6, {1.0, 2.0}, 3, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Trajectories, StandardErrorShrinksWithEnsembleSize) {
  const auto p = driven(4);
  const auto psi = symmetric_condensate(4);
  const auto small = ensemble_expectation(p, psi, 100, {3.0}, 10);
  const auto large = ensemble_expectation(p, psi, 400, {3.0}, 20);
  EXPECT_NEAR(small.std_error[0] / large.std_error[0], 2.0, 0.5);
}

void expect_matches_master(const DimerParams& p, double dt) {
  const auto psi = symmetric_condensate(p.N);
  std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  const auto ens = ensemble_expectation(p, psi, 600, grid, 2024);
  MasterOptions mo;
  mo.sample_every = static_cast<int>(std::lround(0.5 / dt));
  const auto master = integrate_master(DensityMatrix::pure(psi), p, 4.0, dt, mo);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::lround(grid[i] / 0.5));
    ASSERT_NEAR(master.times[k], grid[i], 1e-12);
    EXPECT_LE(std::abs(ens.mean[i] - master.n1[k]), 3.5 * ens.std_error[i] + 1e-12) << "t=" << grid[i];
  }
}

TEST(Trajectories, EnsembleMatchesMasterEquationDriven) { expect_matches_master(driven(2, 0.5, 0.5), 0.005); }

TEST(Trajectories, EnsembleMatchesMasterEquationStatic) {
  DimerParams p;
  p.N = 3;
  p.U = 0.4;
  p.E = 0.3;
  p.gamma = 0.6;
  expect_matches_master(p, 0.005);
}

TEST(Trajectories, TimeAverageMatchesEnsembleOnLongRun) {
  // Long stroboscopic average of one trajectory against the stroboscopic
  // master-equation state after relaxation.
  const auto p = driven(3, 0.5, 0.5);
  const auto s = run_trajectory(symmetric_condensate(3), p, 50, 4000, 99);
  const double avg = std::accumulate(s.values.begin(), s.values.end(), 0.0) / s.values.size();
  const auto master = integrate_master(DensityMatrix::pure(symmetric_condensate(3)), p, 60.0, 0.005);
  EXPECT_NEAR(avg, master.n1.back(), 0.05 * p.N);
}

}  // namespace
