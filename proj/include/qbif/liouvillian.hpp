#pragma once

// Lindblad generator of the open dimer, its supermatrix form, the stationary
// state and direct time integration of the master equation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "qbif/dimer_model.hpp"
#include "qbif/error.hpp"

namespace qbif {

using SparseComplex = Eigen::SparseMatrix<Complex>;

/// Hermitian, unit-trace, positive semidefinite matrix on the Fock sector.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kPositivityTol = 1e-8;

  /// Validates all invariants; throws IntegrityError on violation.
  static DensityMatrix from_matrix(Eigen::MatrixXcd m) {
    if (m.rows() != m.cols() || m.rows() < 2) throw DimensionMismatch("density matrix must be square, dim >= 2");
    const double anti = (m - m.adjoint()).norm() * 0.5;
    if (anti > kHermitianTol) throw IntegrityError("density matrix not Hermitian: " + std::to_string(anti));
    const Complex tr = m.trace();
    if (std::abs(tr - 1.0) > kTraceTol) throw IntegrityError("density matrix trace != 1: " + std::to_string(tr.real()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kPositivityTol)
      throw IntegrityError("density matrix not positive: " + std::to_string(es.eigenvalues().minCoeff()));
    return DensityMatrix(std::move(m));
  }

  static DensityMatrix pure(const StateVector& psi) {
    const StateVector u = psi / psi.norm();
    return DensityMatrix(u * u.adjoint());
  }

  static DensityMatrix maximally_mixed(int N) {
    const int d = N + 1;
    return DensityMatrix(Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d));
  }

  /// Skips the eigenvalue check; for states produced by trusted integrators.
  static DensityMatrix unchecked(Eigen::MatrixXcd m) { return DensityMatrix(std::move(m)); }

  [[nodiscard]] const Eigen::MatrixXcd& matrix() const noexcept { return m_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(m_.rows()); }
  [[nodiscard]] int N() const noexcept { return dim() - 1; }
  [[nodiscard]] Eigen::VectorXd diagonal() const { return m_.diagonal().real(); }
  [[nodiscard]] double expectation_n1() const {
    double acc = 0.0;
    for (int i = 0; i < dim(); ++i) acc += i * m_(i, i).real();
    return acc;
  }

 private:
  explicit DensityMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) {}
  Eigen::MatrixXcd m_;
};

/// Right-hand side of the master equation for fixed parameters.
class MasterEquation {
 public:
  explicit MasterEquation(DimerParams p) : p_(p) {
    p_.validate();
    ops_ = build_operators(p_.N);
    rate_ = p_.gamma / static_cast<double>(p_.N);
  }

  [[nodiscard]] const DimerParams& params() const noexcept { return p_; }
  [[nodiscard]] const DimerOperators& operators() const noexcept { return ops_; }

  [[nodiscard]] Eigen::MatrixXcd rhs_at(const Eigen::MatrixXcd& rho, double epsilon) const {
    check_dim(rho);
    const FockOperator H = hamiltonian(p_, ops_, epsilon);
    const Complex i(0.0, 1.0);
    Eigen::MatrixXcd out = -i * (H * rho - rho * H);
    if (rate_ != 0.0) {
      out += rate_ * (ops_.V * rho * ops_.V.adjoint() - 0.5 * (ops_.VdV * rho + rho * ops_.VdV));
    }
    return out;
  }

  [[nodiscard]] Eigen::MatrixXcd rhs(const Eigen::MatrixXcd& rho, double t) const {
    return rhs_at(rho, drive(p_, t));
  }

 private:
  void check_dim(const Eigen::MatrixXcd& rho) const {
    if (rho.rows() != ops_.dim() || rho.cols() != ops_.dim())
      throw DimensionMismatch("lindblad_rhs: rho has dim " + std::to_string(rho.rows()) + ", expected " +
                              std::to_string(ops_.dim()));
  }

  DimerParams p_;
  DimerOperators ops_;
  double rate_ = 0.0;
};

inline Eigen::MatrixXcd lindblad_rhs(const Eigen::MatrixXcd& rho, double t, const DimerParams& p) {
  return MasterEquation(p).rhs(rho, t);
}

// ---------------------------------------------------------------------------
// Supermatrix form. Vectorization is zero-based row-major: rho(m, n) sits in
// slot m * d + n, so vec(A X B) = (A kron B^T) vec(X).

inline Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& m) {
  const Eigen::Index d = m.rows();
  Eigen::VectorXcd v(d * m.cols());
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
  return v;
}

inline Eigen::MatrixXcd unvectorize(const Eigen::VectorXcd& v, int d) {
  if (v.size() != static_cast<Eigen::Index>(d) * d) throw DimensionMismatch("unvectorize: size is not d^2");
  Eigen::MatrixXcd m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = v(static_cast<Eigen::Index>(r) * d + c);
  return m;
}

struct SuperMatrix {
  int fock_dim = 0;      // d = N + 1
  SparseComplex matrix;  // d^2 x d^2

  [[nodiscard]] Eigen::Index dim() const noexcept { return matrix.rows(); }
  [[nodiscard]] Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return matrix * v; }
};

namespace detail {

struct Entry {
  int row;
  int col;
  Complex value;
};

inline std::vector<Entry> nonzeros(const Eigen::MatrixXcd& m) {
  std::vector<Entry> out;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c) != Complex(0.0)) out.push_back({r, c, m(r, c)});
  return out;
}

// Appends scale * (A kron B) as triplets.
inline void add_kron(std::vector<Eigen::Triplet<Complex>>& trip, const Eigen::MatrixXcd& a,
                     const Eigen::MatrixXcd& b, Complex scale) {
  const auto na = nonzeros(a);
  const auto nb = nonzeros(b);
  const int db = static_cast<int>(b.rows());
  for (const auto& x : na)
    for (const auto& y : nb) trip.emplace_back(x.row * db + y.row, x.col * db + y.col, scale * x.value * y.value);
}

}  // namespace detail

/// Liouvillian at a frozen drive value epsilon.
inline SuperMatrix build_supermatrix(const DimerParams& p, double epsilon) {
  p.validate();
  const DimerOperators ops = build_operators(p.N);
  const int d = ops.dim();
  const FockOperator H = hamiltonian(p, ops, epsilon);
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(d, d);
  const Complex i(0.0, 1.0);
  const double rate = p.gamma / static_cast<double>(p.N);

  std::vector<Eigen::Triplet<Complex>> trip;
  detail::add_kron(trip, H, I, -i);
  detail::add_kron(trip, I, H.transpose(), i);
  if (rate != 0.0) {
    detail::add_kron(trip, ops.V, ops.V.conjugate(), rate);
    detail::add_kron(trip, ops.VdV, I, -0.5 * rate);
    detail::add_kron(trip, I, ops.VdV.transpose(), -0.5 * rate);
  }
  // Explicit diagonal keeps the sparsity pattern stable under shifts.
  for (int k = 0; k < d * d; ++k) trip.emplace_back(k, k, Complex(0.0));

  SuperMatrix s;
  s.fock_dim = d;
  s.matrix.resize(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d);
  s.matrix.setFromTriplets(trip.begin(), trip.end());
  s.matrix.makeCompressed();
  return s;
}

// ---------------------------------------------------------------------------
// Stationary state.

struct StationaryOptions {
  double residual_tol = 1e-10;
  double positivity_abort = 1e-6;
  int inverse_iterations = 30;
};

struct StationaryState {
  DensityMatrix rho;
  double residual = 0.0;       // ||Pi vec(rho)|| / ||vec(rho)||
  double min_eigenvalue = 0.0;
  bool used_fallback = false;
};

namespace detail {

inline double relative_residual(const SparseComplex& pi, const Eigen::VectorXcd& x) {
  return (pi * x).norm() / x.norm();
}

// Hermitize, normalize the trace and check positivity.
inline std::pair<Eigen::MatrixXcd, double> finalize_state(const Eigen::VectorXcd& x, int d,
                                                          double positivity_abort) {
  Eigen::MatrixXcd rho = unvectorize(x, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const Complex tr = rho.trace();
  if (std::abs(tr) == 0.0) throw IntegrityError("stationary state has zero trace");
  rho /= tr.real();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -positivity_abort)
    throw IntegrityError("stationary state not positive semidefinite: min eigenvalue " + std::to_string(lo));
  return {std::move(rho), lo};
}

inline Eigen::VectorXcd inverse_iteration(const SparseComplex& pi, int iterations) {
  const Eigen::Index n = pi.rows();
  double scale = 0.0;
  for (int k = 0; k < pi.outerSize(); ++k)
    for (SparseComplex::InnerIterator it(pi, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  SparseComplex shifted = pi;
  const double sigma = 1e-8 * std::max(scale, 1.0);
  for (Eigen::Index k = 0; k < n; ++k) shifted.coeffRef(k, k) += sigma;
  Eigen::SparseLU<SparseComplex, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success) throw NumericalFailure("stationary fallback: factorization failed", 0.0);
  Eigen::VectorXcd x = Eigen::VectorXcd::Ones(n);
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  for (int k = 0; k < d; ++k) x(static_cast<Eigen::Index>(k) * d + k) += 1.0;
  x.normalize();
  for (int it = 0; it < iterations; ++it) {
    x = lu.solve(x);
    x.normalize();
  }
  return x;
}

}  // namespace detail

/// Null vector of the Liouvillian, normalized to unit trace. The first row of
/// Pi is replaced by the trace functional and the bordered system solved
/// directly; inverse iteration is the fallback when that fails.
inline StationaryState stationary_state(const SuperMatrix& pi, const StationaryOptions& opt = {}) {
  const int d = pi.fock_dim;
  const Eigen::Index n = pi.dim();
  if (n != static_cast<Eigen::Index>(d) * d) throw DimensionMismatch("stationary_state: malformed supermatrix");

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(pi.matrix.nonZeros()) + d);
  for (int k = 0; k < pi.matrix.outerSize(); ++k)
    for (SparseComplex::InnerIterator it(pi.matrix, k); it; ++it)
      if (it.row() != 0) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int m = 0; m < d; ++m) trip.emplace_back(0, m * d + m, Complex(1.0));
  SparseComplex bordered(n, n);
  bordered.setFromTriplets(trip.begin(), trip.end());
  bordered.makeCompressed();

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs(0) = 1.0;

  bool fallback = false;
  Eigen::VectorXcd x;
  Eigen::SparseLU<SparseComplex, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(bordered);
  if (lu.info() == Eigen::Success) {
    x = lu.solve(rhs);
    const Eigen::VectorXcd r = rhs - bordered * x;  // one refinement step
    x += lu.solve(r);
    if (!x.allFinite() || detail::relative_residual(pi.matrix, x) > opt.residual_tol) fallback = true;
  } else {
    fallback = true;
  }
  if (fallback) x = detail::inverse_iteration(pi.matrix, opt.inverse_iterations);

  auto [rho, lo] = detail::finalize_state(x, d, opt.positivity_abort);
  const double res = detail::relative_residual(pi.matrix, vectorize(rho));
  if (res > opt.residual_tol) throw NumericalFailure("stationary_state: residual above tolerance", res);
  return StationaryState{DensityMatrix::unchecked(std::move(rho)), res, lo, fallback};
}

/// tr(rho^2); for Hermitian rho this is the squared Frobenius norm.
inline double purity(const Eigen::MatrixXcd& rho) {
  Complex acc(0.0);
  for (Eigen::Index r = 0; r < rho.rows(); ++r)
    for (Eigen::Index c = 0; c < rho.cols(); ++c) acc += rho(r, c) * rho(c, r);
  return acc.real();
}

inline double purity(const DensityMatrix& rho) { return purity(rho.matrix()); }

// ---------------------------------------------------------------------------
// Direct integration of the master equation (classical RK4, steps aligned to
// the drive switching times).

struct MasterOptions {
  int sample_every = 1;       // record every k-th step (and t = 0)
  bool keep_states = false;
  double drift_abort = 1e-6;  // trace drift that aborts the run
};

struct MasterSeries {
  std::vector<double> times;
  std::vector<double> n1;  // <n1>(t)
  std::vector<DensityMatrix> states;
  double max_trace_drift = 0.0;
};

namespace detail {

inline long aligned_step_count(double span, double dt, const char* what) {
  const double k = span / dt;
  const double kr = std::round(k);
  if (kr < 1.0 || std::abs(k - kr) > 1e-9 * std::max(1.0, kr))
    throw InvalidParameter(std::string(what) + ": step does not divide the interval");
  return static_cast<long>(kr);
}

}  // namespace detail

inline MasterSeries integrate_master(const DensityMatrix& rho0, const DimerParams& p, double t_end, double dt,
                                     const MasterOptions& opt = {}) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw InvalidParameter("integrate_master: need dt > 0 and t_end >= 0");
  if (opt.sample_every < 1) throw InvalidParameter("integrate_master: sample_every must be >= 1");
  if (p.A != 0.0) detail::aligned_step_count(0.5 * p.T, dt, "integrate_master");
  const long steps = t_end == 0.0 ? 0 : detail::aligned_step_count(t_end, dt, "integrate_master");

  const MasterEquation eq(p);
  if (rho0.dim() != eq.operators().dim()) throw DimensionMismatch("integrate_master: rho0 dimension");

  MasterSeries out;
  Eigen::MatrixXcd rho = rho0.matrix();
  auto record = [&](double t) {
    out.times.push_back(t);
    double n1 = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i) n1 += static_cast<double>(i) * rho(i, i).real();
    out.n1.push_back(n1);
    if (opt.keep_states) out.states.push_back(DensityMatrix::unchecked(rho));
  };
  record(0.0);

  for (long s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * dt;
    const double eps = drive(p, t + 0.5 * dt);  // constant over an aligned step
    const Eigen::MatrixXcd k1 = eq.rhs_at(rho, eps);
    const Eigen::MatrixXcd k2 = eq.rhs_at(rho + 0.5 * dt * k1, eps);
    const Eigen::MatrixXcd k3 = eq.rhs_at(rho + 0.5 * dt * k2, eps);
    const Eigen::MatrixXcd k4 = eq.rhs_at(rho + dt * k3, eps);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const double drift = std::abs(rho.trace() - 1.0);
    out.max_trace_drift = std::max(out.max_trace_drift, drift);
    if (drift > opt.drift_abort) throw NumericalFailure("integrate_master: trace drift, reduce dt", drift);
    if ((s + 1) % opt.sample_every == 0) record(static_cast<double>(s + 1) * dt);
  }
  return out;
}

}  // namespace qbif
