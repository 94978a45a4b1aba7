#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qbif/histogram.hpp"
#include "qbif/meanfield.hpp"

namespace {

using namespace qbif;
constexpr double kPi = std::numbers::pi;

DimerParams stationary(double U, double J = 1.0, double E = 0.0, double gamma = 0.1) {
  DimerParams p;
  p.U = U;
  p.J = J;
  p.E = E;
  p.gamma = gamma;
  return p;
}

DimerParams driven(double U, double gamma = 0.1) {
  DimerParams p;
  p.J = -1.0;
  p.E = 1.0;
  p.A = 1.5;
  p.T = 1.0;
  p.gamma = gamma;
  p.U = U;
  p.N = 1000;
  return p;
}

TEST(MeanField, SymmetricEquilibrium) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 10; ++k) {
    const auto p = stationary(u(rng), u(rng), 0.0, std::abs(u(rng)));
    const SpinState d = spin_rhs_at({0.5, 0.0, 0.0}, 0.0, p);
    EXPECT_EQ(d.x, 0.0);
    EXPECT_EQ(d.y, 0.0);
    EXPECT_EQ(d.z, 0.0);
    const BlochRates b = bloch_rhs_at({kPi / 2, 0.0}, 0.0, p);
    EXPECT_LT(std::hypot(b.dtheta, b.dphi), 1e-14);
  }
}

TEST(MeanField, CorrectedFormConservesShell) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const SpinState s{u(rng), u(rng), u(rng)};
    const auto p = stationary(u(rng), u(rng), u(rng), std::abs(u(rng)));
    const SpinState d = spin_rhs_at(s, p.E, p);
    EXPECT_NEAR(s.x * d.x + s.y * d.y + s.z * d.z, 0.0, 1e-14);
    // the printed sign leaks S^2 at rate -8 J y z
    const SpinState q = spin_rhs_at(s, p.E, p, SzSign::Printed);
    EXPECT_NEAR(2.0 * (s.x * q.x + s.y * q.y + s.z * q.z), -8.0 * p.J * s.y * s.z, 1e-13);
  }
}

TEST(MeanField, ChainRuleAgreement) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const auto p = stationary(4 * u(rng) - 2, 4 * u(rng) - 2, 2 * u(rng) - 1, u(rng));
    const BlochState b{0.05 + (kPi - 0.1) * u(rng), -kPi + 2 * kPi * u(rng)};
    // numerical derivative of the spin map along the Bloch flow
    const BlochRates r = bloch_rhs_at(b, p.E, p);
    const double h = 1e-6;
    const SpinState a = to_spin({b.theta + h * r.dtheta, b.phi + h * r.dphi});
    const SpinState c = to_spin({b.theta - h * r.dtheta, b.phi - h * r.dphi});
    const SpinState d = spin_rhs_at(to_spin(b), p.E, p);
    EXPECT_NEAR((a.x - c.x) / (2 * h), d.x, 1e-7);
    EXPECT_NEAR((a.y - c.y) / (2 * h), d.y, 1e-7);
    EXPECT_NEAR((a.z - c.z) / (2 * h), d.z, 1e-7);
  }
}

TEST(MeanField, PoleIsSingular) {
  EXPECT_THROW(bloch_rhs_at({0.0, 0.3}, 0.0, stationary(0.1)), SingularityError);
  EXPECT_THROW(bloch_rhs_at({kPi, 0.3}, 0.0, stationary(0.1)), SingularityError);
  // Cartesian integration passes through the pole without trouble
  auto p = stationary(0.0, 1.0, 0.0, 0.0);
  EXPECT_NO_THROW(integrate_meanfield(SpinState{0.0, 0.0, 0.5}, p, 3.0, 0.01));
}

TEST(MeanField, ParticleNumber) {
  EXPECT_NEAR(particle_number(kPi / 2, 50), 25.0, 1e-12);
  EXPECT_NEAR(particle_number(0.0, 50), 50.0, 1e-12);
  EXPECT_NEAR(particle_number(kPi, 1000), 0.0, 1e-12);
}

TEST(MeanField, ConversionsRoundTrip) {
  const BlochState b{1.1, -2.5};
  const BlochState r = to_bloch(to_spin(b));
  EXPECT_NEAR(r.theta, b.theta, 1e-14);
  EXPECT_NEAR(r.phi, b.phi, 1e-14);
  EXPECT_NEAR(to_spin(b).norm2(), 0.25, 1e-15);
  EXPECT_NEAR(wrap_angle(3 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_THROW(to_bloch({0, 0, 0}), InvalidParameter);
}

TEST(MeanField, RabiRotationWithoutDissipation) {
  // gamma = U = eps = 0: the spin precesses about x at angular rate 2J.
  const auto p = stationary(0.0, 0.8, 0.0, 0.0);
  const SpinState s0{0.0, 0.0, 0.5};
  const auto tr = integrate_meanfield(s0, p, 2.0, 0.01, {0.5, 1.0, 2.0});
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double w = 2.0 * p.J * tr.times[i];
    EXPECT_NEAR(tr.states[i].x, 0.0, 1e-12);
    EXPECT_NEAR(tr.states[i].y, -0.5 * std::sin(w), 1e-9);
    EXPECT_NEAR(tr.states[i].z, 0.5 * std::cos(w), 1e-9);
  }
}

TEST(MeanField, FourthOrderConvergence) {
  const auto p = driven(0.6);
  const SpinState s0 = to_spin(kDefaultDrivenStart);
  const auto ref = integrate_meanfield(s0, p, 4.0, 1.0 / 3200).states.back().vec();
  const double e1 = (integrate_meanfield(s0, p, 4.0, 1.0 / 50).states.back().vec() - ref).norm();
  const double e2 = (integrate_meanfield(s0, p, 4.0, 1.0 / 100).states.back().vec() - ref).norm();
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(MeanField, ShellPreservedOverManyPeriods) {
  const auto p = driven(0.9);
  const auto tr = integrate_meanfield(kDefaultDrivenStart, p, 1000.0, p.T / 200);
  EXPECT_LT(tr.max_shell_drift, 1e-9);
}

TEST(MeanField, SymmetricStartStaysPut) {
  const auto tr = integrate_meanfield(BlochState{kPi / 2, 0.0}, stationary(0.3), 50.0, 0.01);
  EXPECT_NEAR(tr.states.back().x, 0.5, 1e-10);
  EXPECT_NEAR(tr.states.back().y, 0.0, 1e-10);
  EXPECT_NEAR(tr.states.back().z, 0.0, 1e-10);
}

TEST(MeanField, RelaxesToStableEquilibrium) {
  const auto p = stationary(0.1);
  const auto tr = integrate_meanfield(BlochState{1.2, 0.7}, p, 1000.0, 0.01);
  const SpinState s = tr.states.back();
  EXPECT_LT(spin_rhs_at(s, 0.0, p).vec().norm(), 1e-8);
  const auto eq = find_equilibria(p);
  const BlochState b = to_bloch(s);
  bool found = false;
  for (const auto& e : eq)
    if (e.stability == Stability::Stable && std::abs(e.state.theta - b.theta) < 1e-6 &&
        std::abs(wrap_angle(e.state.phi - b.phi)) < 1e-6)
      found = true;
  EXPECT_TRUE(found);
}

TEST(MeanField, EquilibriaBeforeAndAfterPitchfork) {
  const auto before = find_equilibria(stationary(0.1));
  EXPECT_EQ(count_stable(before), 1);
  const auto after = find_equilibria(stationary(0.6));
  EXPECT_EQ(count_stable(after), 2);
  EXPECT_GE(count_unstable(after), 1);
  for (const auto& e : after) EXPECT_LT(e.residual, 1e-10);
  // the two stable branches mirror each other about N/2
  std::vector<double> n;
  for (const auto& e : after)
    if (e.stability == Stability::Stable) n.push_back(e.n(50));
  ASSERT_EQ(n.size(), 2U);
  EXPECT_NEAR(n[0] + n[1], 50.0, 1e-6);
  EXPECT_THROW(find_equilibria(driven(0.1)), InvalidParameter);
}

TEST(MeanField, DegenerateRootAtPitchforkIsReportedOnce) {
  // U = J/2 + 2 gamma^2 / J: the symmetric point has a zero Jacobian eigenvalue
  const auto eq = find_equilibria(stationary(0.5 + 2.0 * 0.01));
  int near_symmetric = 0;
  for (const auto& e : eq)
    if (std::abs(e.n(50) - 25.0) < 0.5 && std::abs(e.state.phi) < 1.0) ++near_symmetric;
  EXPECT_EQ(near_symmetric, 1);
  EXPECT_EQ(eq.size(), 2U);
}

TEST(MeanField, EquilibriumSetIsExchangeSymmetric) {
  for (double U : {0.3, 0.6, 1.1}) {
    const auto eq = find_equilibria(stationary(U, 0.7));
    for (const auto& e : eq) {
      const double th = kPi - e.state.theta, ph = wrap_angle(-e.state.phi);
      bool mirrored = false;
      for (const auto& f : eq)
        if (std::abs(f.state.theta - th) < 1e-6 && std::abs(wrap_angle(f.state.phi - ph)) < 1e-6) {
          mirrored = f.stability == e.stability;
        }
      EXPECT_TRUE(mirrored) << "U=" << U;
    }
  }
}

TEST(MeanField, StroboscopicPeriodOneAtLowU) {
  const auto s = stroboscopic_samples(driven(0.05), kDefaultDrivenStart, 2000, 200);
  EXPECT_EQ(cluster_count(s, 1e-6 * 1000), 1);
}

TEST(MeanField, StroboscopicPeriodTwoAtWeakDamping) {
  const auto s = stroboscopic_samples(driven(0.75, 0.025), kDefaultDrivenStart, 2000, 200);
  EXPECT_EQ(cluster_count(s, 1e-6 * 1000), 2);
  // alternating
  EXPECT_GT(std::abs(s[0] - s[1]), 1e-3);
  EXPECT_NEAR(s[0], s[2], 1e-6 * 1000);
}

TEST(MeanField, StaticStroboscopicIsFixedPoint) {
  auto p = stationary(0.1);
  p.N = 100;
  const auto s = stroboscopic_samples(p, {1.3, 0.2}, 1000, 10);
  for (double v : s) EXPECT_NEAR(v, s.front(), 1e-8);
}

}  // namespace
