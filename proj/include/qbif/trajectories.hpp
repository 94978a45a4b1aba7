#pragma once

// Monte Carlo wave-function unraveling of the driven master equation.
//
// Between jumps psi evolves under H_eff = H - (i/2)(gamma/N) V^dag V and its
// squared norm decays monotonically; a jump V psi / |V psi| fires when it
// reaches a uniformly drawn threshold r. The drive is piecewise constant, so
// each half period is propagated exactly from an eigendecomposition of H_eff
// and the crossing time is found by a bracketing root finder. When H_eff is
// too ill-conditioned for that, a fixed-step RK4 path is used instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/tools/roots.hpp>

#include "qbif/dimer_model.hpp"
#include "qbif/error.hpp"
#include "qbif/histogram.hpp"
#include "qbif/parallel.hpp"

namespace qbif {

inline FockOperator effective_hamiltonian(const DimerParams& p, const DimerOperators& ops, double epsilon) {
  const double rate = p.gamma / static_cast<double>(p.N);
  return hamiltonian(p, ops, epsilon) - Complex(0.0, 0.5 * rate) * ops.VdV;
}

struct PropagateOptions {
  double max_phase_step = 0.02;  // h * |H_eff|_1 per RK4 substep
  double norm_increase_tol = 1e-10;
};

namespace detail {

using SparseOp = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

inline SparseOp sparse_effective(const DimerParams& p, const DimerOperators& ops, double epsilon) {
  return effective_hamiltonian(p, ops, epsilon).sparseView(1.0, 0.0);
}

inline double op_norm1(const SparseOp& h) {
  Eigen::VectorXd col = Eigen::VectorXd::Zero(h.cols());
  for (int r = 0; r < h.outerSize(); ++r)
    for (SparseOp::InnerIterator it(h, r); it; ++it) col(it.col()) += std::abs(it.value());
  return col.size() ? col.maxCoeff() : 0.0;
}

// One classical RK4 step of dpsi/dt = -i H psi.
inline StateVector rk4_step(const SparseOp& h, const StateVector& psi, double dt) {
  const Complex mi(0.0, -1.0);
  const StateVector k1 = mi * (h * psi);
  const StateVector k2 = mi * (h * (psi + 0.5 * dt * k1));
  const StateVector k3 = mi * (h * (psi + 0.5 * dt * k2));
  const StateVector k4 = mi * (h * (psi + dt * k3));
  return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline StateVector rk4_propagate(const SparseOp& h, StateVector psi, double span, const PropagateOptions& opt) {
  if (span <= 0.0) return psi;
  const double nrm = op_norm1(h);
  const long n = std::max(1L, static_cast<long>(std::ceil(span * nrm / opt.max_phase_step)));
  const double dt = span / static_cast<double>(n);
  double prev = psi.squaredNorm();
  for (long i = 0; i < n; ++i) {
    psi = rk4_step(h, psi, dt);
    const double cur = psi.squaredNorm();
    if (cur > prev + opt.norm_increase_tol)
      throw NumericalFailure("effective_propagate: squared norm increased", cur - prev);
    prev = cur;
  }
  return psi;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seed of trajectory k in an ensemble drawn from base_seed; distinct for distinct k.
inline std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t k) {
  return detail::splitmix64(base_seed + k);
}

/// RK4 integration of dpsi/dt = -i H_eff psi over [t0, t1] with the drive
/// value at the interval midpoint. The interval must not straddle a drive
/// switching time.
inline StateVector effective_propagate(const StateVector& psi, double t0, double t1, const DimerParams& p,
                                       const DimerOperators& ops, const PropagateOptions& opt = {}) {
  if (psi.size() != ops.dim()) throw DimensionMismatch("effective_propagate: state dimension");
  if (t1 < t0) throw InvalidParameter("effective_propagate: t1 < t0");
  if (p.A != 0.0) {
    const double half = 0.5 * p.T;
    const double k = std::floor(t0 / half + 1e-12) + 1.0;
    if (k * half < t1 - 1e-12 * std::max(1.0, std::abs(t1)))
      throw InvalidParameter("effective_propagate: interval crosses a drive switching time");
  }
  const auto h = detail::sparse_effective(p, ops, drive(p, 0.5 * (t0 + t1)));
  return detail::rk4_propagate(h, psi, t1 - t0, opt);
}

inline StateVector effective_propagate(const StateVector& psi, double t0, double t1, const DimerParams& p) {
  return effective_propagate(psi, t0, t1, p, build_operators(p.N));
}

/// Exact propagation under a constant H_eff = W diag(lambda) W^-1.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const FockOperator& heff) {
    Eigen::ComplexEigenSolver<FockOperator> es(heff);
    if (es.info() != Eigen::Success) throw NumericalFailure("SpectralPropagator: eigensolver failed");
    lambda_ = es.eigenvalues();
    W_ = es.eigenvectors();
    Eigen::PartialPivLU<FockOperator> lu(W_);
    Winv_ = lu.inverse();
    gram_ = W_.adjoint() * W_;
    const Eigen::JacobiSVD<FockOperator> svd(W_);
    const auto& sv = svd.singularValues();
    condition_ = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  }

  [[nodiscard]] double condition() const noexcept { return condition_; }

  /// Coefficients of psi in the eigenbasis.
  [[nodiscard]] StateVector coefficients(const StateVector& psi) const { return Winv_ * psi; }

  [[nodiscard]] StateVector evolve(const StateVector& c, double tau) const { return W_ * phases(c, tau); }

  [[nodiscard]] double norm2(const StateVector& c, double tau) const {
    const StateVector a = phases(c, tau);
    return a.dot(gram_ * a).real();
  }

 private:
  [[nodiscard]] StateVector phases(const StateVector& c, double tau) const {
    StateVector a(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) a(i) = std::exp(Complex(0.0, -tau) * lambda_(i)) * c(i);
    return a;
  }

  StateVector lambda_;
  FockOperator W_;
  FockOperator Winv_;
  FockOperator gram_;
  double condition_ = 0.0;
};

struct TrajectoryOptions {
  double max_condition = 1e6;  // above this the RK4 path is used
  double jump_rel_tol = 1e-10;
  PropagateOptions rk4{};
  bool force_rk4 = false;
};

/// One quantum trajectory. psi is kept unnormalized between jumps and
/// renormalized after each jump.
class QuantumTrajectory {
 public:
  QuantumTrajectory(const StateVector& psi0, const DimerParams& p, std::uint64_t seed, TrajectoryOptions opt = {})
      : p_(p), ops_(build_operators(p.N)), opt_(opt), psi_(psi0), rng_(seed) {
    p.validate();
    if (psi0.size() != p.dim()) throw DimensionMismatch("QuantumTrajectory: state dimension");
    const double n2 = psi0.squaredNorm();
    if (std::abs(n2 - 1.0) > 1e-10) throw InvalidParameter("QuantumTrajectory: psi0 must be normalized");
    threshold_ = draw();
  }

  [[nodiscard]] double time() const noexcept { return t_; }
  [[nodiscard]] long jumps() const noexcept { return jumps_; }
  [[nodiscard]] const StateVector& state() const noexcept { return psi_; }
  [[nodiscard]] double threshold() const noexcept { return threshold_; }

  [[nodiscard]] double expectation_n1() const {
    double num = 0.0;
    for (Eigen::Index i = 0; i < psi_.size(); ++i) num += static_cast<double>(i) * std::norm(psi_(i));
    return num / psi_.squaredNorm();
  }

  void advance_to(double t_target) {
    if (t_target < t_) throw InvalidParameter("QuantumTrajectory: cannot move backwards in time");
    while (t_ < t_target) {
      double seg_end = t_target;
      if (p_.A != 0.0) {
        const double half = 0.5 * p_.T;
        const double sw = (std::floor(t_ / half + 1e-9) + 1.0) * half;
        if (sw < seg_end - 1e-12) seg_end = sw;
      }
      run_segment(seg_end);
      t_ = seg_end;
    }
  }

 private:
  struct Segment {
    detail::SparseOp sparse;
    std::optional<SpectralPropagator> spectral;
  };

  double draw() {
    // Uniform in (0, 1), built from the top 53 bits so it is identical on every platform.
    return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  const Segment& segment_for(double epsilon) {
    auto it = cache_.find(epsilon);
    if (it != cache_.end()) return it->second;
    Segment s;
    const FockOperator heff = effective_hamiltonian(p_, ops_, epsilon);
    s.sparse = heff.sparseView(1.0, 0.0);
    if (!opt_.force_rk4) {
      SpectralPropagator sp(heff);
      if (sp.condition() <= opt_.max_condition) s.spectral.emplace(std::move(sp));
    }
    return cache_.emplace(epsilon, std::move(s)).first->second;
  }

  void jump() {
    StateVector next = ops_.V * psi_;
    const double nrm = next.norm();
    if (!(nrm > 0.0)) throw IntegrityError("quantum jump from a dark state");
    psi_ = next / nrm;
    ++jumps_;
    threshold_ = draw();
  }

  double locate(const auto& norm2_at, double span) const {
    using boost::math::tools::eps_tolerance;
    const double r = threshold_;
    auto f = [&](double tau) { return norm2_at(tau) - r; };
    const double f0 = f(0.0);
    const double f1 = f(span);
    if (f0 <= 0.0) return 0.0;
    const int bits = static_cast<int>(std::ceil(-std::log2(opt_.jump_rel_tol)));
    std::uintmax_t iters = 200;
    const auto br = boost::math::tools::toms748_solve(f, 0.0, span, f0, f1, eps_tolerance<double>(bits), iters);
    return 0.5 * (br.first + br.second);
  }

  void run_segment(double seg_end) {
    const double eps = drive(p_, 0.5 * (t_ + seg_end));
    const Segment& seg = segment_for(eps);
    double t = t_;
    if (seg.spectral) {
      const SpectralPropagator& sp = *seg.spectral;
      while (true) {
        const StateVector c = sp.coefficients(psi_);
        const double span = seg_end - t;
        if (sp.norm2(c, span) > threshold_) {
          psi_ = sp.evolve(c, span);
          return;
        }
        const double tau = locate([&](double s) { return sp.norm2(c, s); }, span);
        psi_ = sp.evolve(c, tau);
        t += tau;
        jump();
      }
    }
    // RK4 path: fixed substeps; the crossing inside a substep is located on
    // the RK4 step taken from the substep start.
    const double nrm = detail::op_norm1(seg.sparse);
    while (t < seg_end) {
      const double span = seg_end - t;
      const long n = std::max(1L, static_cast<long>(std::ceil(span * nrm / opt_.rk4.max_phase_step)));
      const double dt = span / static_cast<double>(n);
      bool jumped = false;
      for (long i = 0; i < n; ++i) {
        const StateVector next = detail::rk4_step(seg.sparse, psi_, dt);
        const double nn = next.squaredNorm();
        if (nn > psi_.squaredNorm() + opt_.rk4.norm_increase_tol)
          throw NumericalFailure("trajectory: squared norm increased", nn - psi_.squaredNorm());
        if (nn > threshold_) {
          psi_ = next;
          t = i + 1 == n ? seg_end : t + dt;
          continue;
        }
        const StateVector start = psi_;
        const double tau =
            locate([&](double s) { return detail::rk4_step(seg.sparse, start, s).squaredNorm(); }, dt);
        psi_ = detail::rk4_step(seg.sparse, start, tau);
        t += tau;
        jump();
        jumped = true;
        break;
      }
      if (!jumped) t = seg_end;
    }
  }

  DimerParams p_;
  DimerOperators ops_;
  TrajectoryOptions opt_;
  StateVector psi_;
  std::mt19937_64 rng_;
  double threshold_ = 1.0;
  double t_ = 0.0;
  long jumps_ = 0;
  std::map<double, Segment> cache_;
};

struct StroboscopicSeries {
  std::vector<double> values;  // <n1>(mT) for the recorded periods
  std::uint64_t seed = 0;
  int realization = 0;
  long jumps = 0;
};

inline StroboscopicSeries run_trajectory(const StateVector& psi0, const DimerParams& p, int n_transient,
                                         int n_record, std::uint64_t seed, const TrajectoryOptions& opt = {}) {
  if (!(p.T > 0.0)) throw InvalidParameter("run_trajectory: T must be > 0");
  if (n_transient < 0 || n_record < 1) throw InvalidParameter("run_trajectory: bad period counts");
  QuantumTrajectory traj(psi0, p, seed, opt);
  StroboscopicSeries out;
  out.seed = seed;
  out.values.reserve(static_cast<std::size_t>(n_record));
  for (int m = 1; m <= n_transient + n_record; ++m) {
    traj.advance_to(m * p.T);
    if (m > n_transient) out.values.push_back(traj.expectation_n1());
  }
  out.jumps = traj.jumps();
  return out;
}

struct EnsembleAverage {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> std_error;
};

/// Mean and standard error of <n1>(t) over n_trajectories seeded trajectories.
inline EnsembleAverage ensemble_expectation(const DimerParams& p, const StateVector& psi0, int n_trajectories,
                                            const std::vector<double>& t_grid, std::uint64_t base_seed,
                                            unsigned workers = 1, const TrajectoryOptions& opt = {}) {
  if (n_trajectories < 2) throw InvalidParameter("ensemble_expectation: need at least 2 trajectories");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || (!t_grid.empty() && t_grid.front() < 0.0))
    throw InvalidParameter("ensemble_expectation: time grid must be sorted and non-negative");
  const auto runs = parallel_map(
      static_cast<std::size_t>(n_trajectories),
      [&](std::size_t k) {
        QuantumTrajectory traj(psi0, p, trajectory_seed(base_seed, k), opt);
        std::vector<double> v;
        v.reserve(t_grid.size());
        for (double t : t_grid) {
          traj.advance_to(t);
          v.push_back(traj.expectation_n1());
        }
        return v;
      },
      workers);
  EnsembleAverage out;
  out.times = t_grid;
  const double n = n_trajectories;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r[j] - mean) * (r[j] - mean);
    out.mean.push_back(mean);
    out.std_error.push_back(std::sqrt(ss / (n - 1.0) / n));
  }
  return out;
}

}  // namespace qbif
