#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "qbif/bifurcation.hpp"
#include "qbif/liouvillian.hpp"

namespace {

using namespace qbif;

Eigen::MatrixXcd random_matrix(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = Complex(g(rng), g(rng));
  return m;
}

Eigen::MatrixXcd random_density(int d, std::mt19937_64& rng) {
  const Eigen::MatrixXcd a = random_matrix(d, rng);
  Eigen::MatrixXcd rho = a * a.adjoint();
  return rho / rho.trace();
}

DimerParams params(int N, double U, double E = 0.0, double J = 1.0, double gamma = 0.1) {
  DimerParams p;
  p.N = N;
  p.U = U;
  p.E = E;
  p.J = J;
  p.gamma = gamma;
  return p;
}

double binomial_pmf(int N, int n) {
  return std::exp(std::lgamma(N + 1.0) - std::lgamma(n + 1.0) - std::lgamma(N - n + 1.0) - N * std::log(2.0));
}

TEST(Liouvillian, DarkStateIsAnnihilated) {
  const auto p = params(12, 0.0);
  const auto s = symmetric_condensate(p.N);
  EXPECT_LT(lindblad_rhs(s * s.adjoint(), 0.3, p).norm(), 1e-12);
  EXPECT_LT(build_supermatrix(p, 0.0).apply(vectorize(s * s.adjoint())).norm(), 1e-12);
}

TEST(Liouvillian, MaximallyMixedIsStaticWithoutDissipation) {
  const auto p = params(6, 0.8, 0.3, 1.0, 0.0);
  EXPECT_LT(lindblad_rhs(DensityMatrix::maximally_mixed(6).matrix(), 0.0, p).norm(), 1e-14);
}

TEST(Liouvillian, TraceFreeAndHermitianOutput) {
  std::mt19937_64 rng(3);
  const auto p = params(3, 0.4, 0.1);
  for (int k = 0; k < 10; ++k) {
    const auto out = lindblad_rhs(random_density(4, rng), 0.0, p);
    EXPECT_LT(std::abs(out.trace()), 1e-13);
    EXPECT_LT((out - out.adjoint()).norm(), 1e-13);
  }
}

TEST(Liouvillian, WrongDimensionThrows) {
  EXPECT_THROW(lindblad_rhs(Eigen::MatrixXcd::Identity(3, 3), 0.0, params(4, 0.0)), DimensionMismatch);
}

TEST(Liouvillian, SupermatrixMatchesRhs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int N : {1, 2, 5, 10}) {
    const auto p = params(N, u(rng), u(rng), u(rng), 0.3);
    const double eps = p.E;
    const auto pi = build_supermatrix(p, eps);
    for (int k = 0; k < 50; ++k) {
      Eigen::MatrixXcd h = random_matrix(N + 1, rng);
      h = 0.5 * (h + h.adjoint());
      const Eigen::MatrixXcd ref = lindblad_rhs(h, 0.0, p);
      const Eigen::MatrixXcd got = unvectorize(pi.apply(vectorize(h)), N + 1);
      EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff())) << N;
    }
  }
  // linear, so non-Hermitian inputs must agree too
  const auto p = params(1, 0.5, 0.2);
  const auto pi = build_supermatrix(p, p.E);
  for (int k = 0; k < 20; ++k) {
    const auto m = random_matrix(2, rng);
    EXPECT_LT((unvectorize(pi.apply(vectorize(m)), 2) - lindblad_rhs(m, 0.0, p)).norm(), 1e-12);
  }
}

TEST(Liouvillian, SupermatrixColumnsFromBasisMatrices) {
  // Build Pi column by column from lindblad_rhs on matrix units.
  const auto p = params(3, 0.7, -0.2, 0.9, 0.4);
  const int d = 4;
  Eigen::MatrixXcd dense(d * d, d * d);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(d, d);
      e(m, n) = 1.0;
      dense.col(m * d + n) = vectorize(lindblad_rhs(e, 0.0, p));
    }
  const Eigen::MatrixXcd pi = build_supermatrix(p, p.E).matrix;
  EXPECT_LT((pi - dense).norm(), 1e-12);
  // trace preservation: sum over diagonal slots of each column vanishes
  for (int c = 0; c < d * d; ++c) {
    Complex tr = 0.0;
    for (int m = 0; m < d; ++m) tr += pi(m * d + m, c);
    EXPECT_LT(std::abs(tr), 1e-12);
  }
}

TEST(Liouvillian, VectorizeRoundTrip) {
  std::mt19937_64 rng(5);
  const auto m = random_matrix(7, rng);
  EXPECT_EQ(unvectorize(vectorize(m), 7), m);
  EXPECT_EQ(vectorize(m)(2 * 7 + 5), m(2, 5));
  EXPECT_THROW(unvectorize(Eigen::VectorXcd::Zero(10), 3), DimensionMismatch);
}

TEST(Liouvillian, DensityMatrixValidation) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(3, 3) / 3.0;
  EXPECT_NO_THROW(DensityMatrix::from_matrix(m));
  Eigen::MatrixXcd bad_trace = m * 2.0;
  EXPECT_THROW(DensityMatrix::from_matrix(bad_trace), IntegrityError);
  Eigen::MatrixXcd not_herm = m;
  not_herm(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix::from_matrix(not_herm), IntegrityError);
  Eigen::MatrixXcd negative = Eigen::Vector3cd(1.2, 0.0, -0.2).asDiagonal();
  EXPECT_THROW(DensityMatrix::from_matrix(negative), IntegrityError);
}

TEST(Liouvillian, StationaryDarkState) {
  const int N = 20;
  const auto st = stationary_state(build_supermatrix(params(N, 0.0), 0.0));
  for (int n = 0; n <= N; ++n) EXPECT_NEAR(st.rho.matrix()(n, n).real(), binomial_pmf(N, n), 1e-8);
  EXPECT_NEAR(purity(st.rho), 1.0, 1e-8);
  EXPECT_LT(st.residual, 1e-10);
}

TEST(Liouvillian, StationaryUnimodalThenBimodal) {
  const auto low = stationary_state(build_supermatrix(params(50, 0.2), 0.0));
  const auto high = stationary_state(build_supermatrix(params(50, 0.6), 0.0));
  EXPECT_EQ(diagonal_maxima(diagonal_of(low.rho)).count, 1);
  EXPECT_EQ(diagonal_maxima(diagonal_of(high.rho)).count, 2);
  EXPECT_LT(low.residual, 1e-10);
  EXPECT_LT(high.residual, 1e-10);
  EXPECT_GT(high.min_eigenvalue, -1e-8);
  // site-exchange symmetry at E = 0
  const auto d = high.rho.diagonal();
  for (int n = 0; n <= 50; ++n) EXPECT_NEAR(d(n), d(50 - n), 1e-9);
}

TEST(Liouvillian, StationaryAgainstDenseNullVector) {
  const auto p = params(6, 0.45, 0.05, 0.8, 0.25);
  const auto pi = build_supermatrix(p, p.E);
  const Eigen::MatrixXcd dense = pi.matrix;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(dense);
  ASSERT_EQ(lu.dimensionOfKernel(), 1);
  Eigen::MatrixXcd ref = unvectorize(lu.kernel().col(0), 7);
  ref /= ref.trace();
  EXPECT_LT((stationary_state(pi).rho.matrix() - ref).norm(), 1e-10);
}

TEST(Liouvillian, PurityExamples) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  StateVector psi(5);
  for (auto& x : psi) x = Complex(g(rng), g(rng));
  EXPECT_NEAR(purity(DensityMatrix::pure(psi)), 1.0, 1e-14);
  EXPECT_NEAR(purity(DensityMatrix::maximally_mixed(50)), 1.0 / 51.0, 1e-15);
}

TEST(Liouvillian, MasterDarkStateStaysPut) {
  const auto p = params(8, 0.0);
  const auto rho0 = DensityMatrix::pure(symmetric_condensate(8));
  MasterOptions opt;
  opt.keep_states = true;
  opt.sample_every = 50;
  const auto series = integrate_master(rho0, p, 5.0, 0.01, opt);
  for (const auto& r : series.states) EXPECT_LT((r.matrix() - rho0.matrix()).norm(), 1e-12);
  for (double n1 : series.n1) EXPECT_NEAR(n1, 4.0, 1e-12);
}

TEST(Liouvillian, MasterUnitaryKeepsPurity) {
  std::mt19937_64 rng(21);
  auto p = params(5, 0.9, 0.2, 1.0, 0.0);
  p.A = 1.5;
  p.T = 1.0;
  const auto rho0 = DensityMatrix::from_matrix(random_density(6, rng));
  MasterOptions opt;
  opt.keep_states = true;
  opt.sample_every = 40;
  const auto series = integrate_master(rho0, p, 4.0, 0.0025, opt);
  const double p0 = purity(rho0);
  for (const auto& r : series.states) EXPECT_NEAR(purity(r), p0, 1e-8);
  EXPECT_LT(series.max_trace_drift, 1e-9);
}

TEST(Liouvillian, MasterMatchesExponentialPropagation) {
  std::mt19937_64 rng(4);
  auto p = params(3, 0.5, 1.0, -1.0, 0.1);
  p.A = 1.5;
  p.T = 1.0;
  const auto rho0 = random_density(4, rng);
  const Eigen::MatrixXcd on = build_supermatrix(p, p.E + p.A).matrix;
  const Eigen::MatrixXcd off = build_supermatrix(p, p.E).matrix;
  const Eigen::MatrixXcd half_on = (0.5 * on).exp();
  const Eigen::MatrixXcd half_off = (0.5 * off).exp();
  auto worst_error = [&](double dt) {
    MasterOptions opt;
    opt.keep_states = true;
    opt.sample_every = static_cast<int>(std::lround(0.5 / dt));
    const auto series = integrate_master(DensityMatrix::unchecked(rho0), p, 2.0, dt, opt);
    Eigen::VectorXcd v = vectorize(rho0);
    double worst = 0.0;
    for (std::size_t k = 1; k < series.states.size(); ++k) {
      v = (k % 2 == 1 ? half_on : half_off) * v;  // samples every half period
      worst = std::max(worst, (series.states[k].matrix() - unvectorize(v, 4)).norm());
    }
    return worst;
  };
  const double coarse = worst_error(0.005);
  const double fine = worst_error(0.0025);
  EXPECT_LT(fine, 1e-8);
  EXPECT_NEAR(coarse / fine, 16.0, 3.0);  // fourth order
}

TEST(Liouvillian, MasterRejectsMisalignedStep) {
  auto p = params(3, 0.1);
  p.A = 1.0;
  p.T = 1.0;
  EXPECT_THROW(integrate_master(DensityMatrix::maximally_mixed(3), p, 1.0, 0.3), InvalidParameter);
}

}  // namespace
