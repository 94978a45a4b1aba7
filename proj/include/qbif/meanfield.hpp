#pragma once

// Classical mean-field limit of the dimer: spin equations on the sphere
// S^2 = 1/4, their Bloch-angle form, equilibria and stroboscopic data.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "qbif/dimer_model.hpp"
#include "qbif/error.hpp"

namespace qbif {

struct SpinState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] double norm2() const noexcept { return x * x + y * y + z * z; }
  [[nodiscard]] Eigen::Vector3d vec() const { return {x, y, z}; }
  static SpinState from(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
};

struct BlochState {
  double theta = std::numbers::pi / 2;  // polar angle, (0, pi)
  double phi = 0.0;                     // azimuth, [-pi, pi)
};

struct BlochRates {
  double dtheta = 0.0;
  double dphi = 0.0;
};

/// Sign of the J term in dSz/dt. The printed form, -2 J Sy, does not conserve
/// S^2 and disagrees with the Bloch-angle equations; kept for inspection only.
enum class SzSign { Corrected, Printed };

inline double wrap_angle(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  phi = std::fmod(phi + std::numbers::pi, two_pi);
  if (phi < 0.0) phi += two_pi;
  return phi - std::numbers::pi;
}

inline SpinState to_spin(const BlochState& b) {
  const double s = std::sin(b.theta);
  return {0.5 * std::cos(b.phi) * s, 0.5 * std::sin(b.phi) * s, 0.5 * std::cos(b.theta)};
}

inline BlochState to_bloch(const SpinState& s) {
  const double r = std::sqrt(s.norm2());
  if (r == 0.0) throw InvalidParameter("to_bloch: zero spin vector");
  return {std::acos(std::clamp(s.z / r, -1.0, 1.0)), std::atan2(s.y, s.x)};
}

/// n = (1 + cos theta) N / 2 bosons on site 1.
inline double particle_number(double theta, int N) { return 0.5 * (1.0 + std::cos(theta)) * N; }

inline SpinState spin_rhs_at(const SpinState& s, double epsilon, const DimerParams& p,
                             SzSign sign = SzSign::Corrected) {
  const double g = p.gamma;
  const double jz = sign == SzSign::Corrected ? 2.0 * p.J * s.y : -2.0 * p.J * s.y;
  return {2.0 * epsilon * s.y - 8.0 * p.U * s.z * s.y + 8.0 * g * (s.y * s.y + s.z * s.z),
          -2.0 * epsilon * s.x + 8.0 * p.U * s.x * s.z - 2.0 * p.J * s.z - 8.0 * g * s.x * s.y,
          jz - 8.0 * g * s.x * s.z};
}

inline SpinState spin_rhs(const SpinState& s, double t, const DimerParams& p, SzSign sign = SzSign::Corrected) {
  return spin_rhs_at(s, drive(p, t), p, sign);
}

inline BlochRates bloch_rhs_at(const BlochState& b, double epsilon, const DimerParams& p) {
  const double st = std::sin(b.theta);
  if (std::abs(st) <= 1e-10) throw SingularityError("bloch_rhs: theta too close to a pole");
  const double ct = std::cos(b.theta);
  const double sp = std::sin(b.phi);
  const double cp = std::cos(b.phi);
  return {-2.0 * p.J * sp + 4.0 * p.gamma * cp * ct,
          -2.0 * p.J * (ct / st) * cp - 2.0 * epsilon + 4.0 * p.U * ct - 4.0 * p.gamma * sp / st};
}

inline BlochRates bloch_rhs(const BlochState& b, double t, const DimerParams& p) {
  return bloch_rhs_at(b, drive(p, t), p);
}

// ---------------------------------------------------------------------------
// Integration. Two-stage Gauss-Legendre (order 4) in Cartesian form; being a
// collocation method it preserves the quadratic invariant S^2. Steps are
// aligned to the drive switching times so epsilon is constant per step.

class MeanFieldIntegrator {
 public:
  MeanFieldIntegrator(const DimerParams& p, SpinState s0, double max_step, SzSign sign = SzSign::Corrected)
      : p_(p), s_(s0.vec()), h_max_(max_step), sign_(sign), shell0_(s0.norm2()) {
    if (!(max_step > 0.0)) throw InvalidParameter("meanfield: step must be > 0");
    if (p.A != 0.0 && !(p.T > 0.0)) throw InvalidParameter("meanfield: T must be > 0 when A != 0");
  }

  [[nodiscard]] double time() const noexcept { return t_; }
  [[nodiscard]] SpinState state() const { return SpinState::from(s_); }
  [[nodiscard]] double max_shell_drift() const noexcept { return max_drift_; }

  /// Advances to t_target, splitting at every drive switching time.
  void advance_to(double t_target) {
    while (t_ < t_target) {
      double seg_end = t_target;
      const double sw = next_switch();
      if (sw < seg_end - 1e-12) seg_end = sw;
      integrate_segment(seg_end);
      t_ = seg_end;
      const double drift = std::abs(s_.squaredNorm() - shell0_);
      max_drift_ = std::max(max_drift_, drift);
      if (sign_ == SzSign::Corrected && drift > 1e-6)
        throw NumericalFailure("meanfield: shell drift, reduce the step", drift);
    }
  }

 private:
  [[nodiscard]] double next_switch() const {
    if (p_.A == 0.0) return std::numeric_limits<double>::infinity();
    const double half = 0.5 * p_.T;
    const double k = std::floor(t_ / half + 1e-9) + 1.0;
    return k * half;
  }

  [[nodiscard]] Eigen::Vector3d f(const Eigen::Vector3d& v, double eps) const {
    return spin_rhs_at(SpinState::from(v), eps, p_, sign_).vec();
  }

  void integrate_segment(double t_end) {
    const double span = t_end - t_;
    if (span <= 0.0) return;
    const double eps = drive(p_, t_ + 0.5 * span);
    const long n = std::max(1L, static_cast<long>(std::ceil(span / h_max_ - 1e-9)));
    const double h = span / static_cast<double>(n);
    for (long i = 0; i < n; ++i) gauss_step(h, eps);
  }

  void gauss_step(double h, double eps) {
    constexpr double r3 = 1.7320508075688772;
    constexpr double a11 = 0.25, a12 = 0.25 - r3 / 6.0;
    constexpr double a21 = 0.25 + r3 / 6.0, a22 = 0.25;
    Eigen::Vector3d k1 = f(s_, eps);
    Eigen::Vector3d k2 = k1;
    for (int it = 0; it < 100; ++it) {
      const Eigen::Vector3d n1 = f(s_ + h * (a11 * k1 + a12 * k2), eps);
      const Eigen::Vector3d n2 = f(s_ + h * (a21 * k1 + a22 * k2), eps);
      const double change = (n1 - k1).lpNorm<Eigen::Infinity>() + (n2 - k2).lpNorm<Eigen::Infinity>();
      k1 = n1;
      k2 = n2;
      if (change <= 1e-15 * std::max(1.0, k1.lpNorm<Eigen::Infinity>())) break;
      if (it == 99) throw NumericalFailure("meanfield: implicit stage iteration did not converge", change);
    }
    s_ += 0.5 * h * (k1 + k2);
  }

  DimerParams p_;
  Eigen::Vector3d s_;
  double h_max_;
  SzSign sign_;
  double shell0_;
  double t_ = 0.0;
  double max_drift_ = 0.0;
};

struct MeanFieldTrajectory {
  std::vector<double> times;
  std::vector<SpinState> states;
  double max_shell_drift = 0.0;

  [[nodiscard]] BlochState bloch(std::size_t i) const { return to_bloch(states[i]); }
};

/// Integrates from t = 0 and records the state at each requested sample time
/// (sorted, non-negative). An empty list samples t_end only.
inline MeanFieldTrajectory integrate_meanfield(const SpinState& s0, const DimerParams& p, double t_end, double dt,
                                               std::vector<double> sample_times = {},
                                               SzSign sign = SzSign::Corrected) {
  if (!(t_end >= 0.0)) throw InvalidParameter("integrate_meanfield: t_end must be >= 0");
  if (sample_times.empty()) sample_times.push_back(t_end);
  if (!std::is_sorted(sample_times.begin(), sample_times.end()) || sample_times.front() < 0.0)
    throw InvalidParameter("integrate_meanfield: sample times must be sorted and non-negative");
  MeanFieldIntegrator integ(p, s0, dt, sign);
  MeanFieldTrajectory out;
  for (double ts : sample_times) {
    integ.advance_to(ts);
    out.times.push_back(ts);
    out.states.push_back(integ.state());
  }
  out.max_shell_drift = integ.max_shell_drift();
  return out;
}

inline MeanFieldTrajectory integrate_meanfield(const BlochState& b0, const DimerParams& p, double t_end, double dt,
                                               std::vector<double> sample_times = {}) {
  return integrate_meanfield(to_spin(b0), p, t_end, dt, std::move(sample_times));
}

/// Generic off-symmetry start for driven runs.
inline constexpr BlochState kDefaultDrivenStart{std::numbers::pi / 2 + 0.1, 0.1};

/// Particle number on site 1 at the period boundaries after n_transient
/// periods. The step defaults to T/200.
inline std::vector<double> stroboscopic_samples(const DimerParams& p, const BlochState& b0, int n_transient,
                                                int n_record, double dt = 0.0) {
  if (!(p.T > 0.0)) throw InvalidParameter("stroboscopic_samples: T must be > 0");
  if (n_transient < 0 || n_record < 1) throw InvalidParameter("stroboscopic_samples: bad period counts");
  MeanFieldIntegrator integ(p, to_spin(b0), dt > 0.0 ? dt : p.T / 200.0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_record));
  for (int m = 1; m <= n_transient + n_record; ++m) {
    integ.advance_to(m * p.T);
    if (m > n_transient) {
      const SpinState s = integ.state();
      out.push_back(0.5 * (1.0 + s.z / std::sqrt(s.norm2())) * p.N);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equilibria of the autonomous (A = 0) Bloch equations.

enum class Stability { Stable, Unstable, Marginal };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "?";
}

struct Equilibrium {
  BlochState state;
  Stability stability = Stability::Marginal;
  std::array<Complex, 2> jacobian_eigenvalues{};
  double residual = 0.0;

  [[nodiscard]] double n(int N) const { return particle_number(state.theta, N); }
};

struct EquilibriumOptions {
  int grid = 64;
  double residual_tol = 1e-10;
  double dedup = 1e-6;
  // near a degenerate root Newton stalls ~1e-4 rad out; such clusters collapse to their best member
  double merge = 1e-3;
  double fd_step = 1e-6;
  double stability_tol = 1e-8;
  int max_newton = 60;
};

namespace detail {

inline Eigen::Vector2d bloch_vec(const Eigen::Vector2d& x, const DimerParams& p) {
  const BlochRates r = bloch_rhs_at({x(0), x(1)}, p.E, p);
  return {r.dtheta, r.dphi};
}

inline Eigen::Matrix2d bloch_jacobian(const Eigen::Vector2d& x, const DimerParams& p, double h) {
  Eigen::Matrix2d jac;
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e(c) = h;
    jac.col(c) = (bloch_vec(x + e, p) - bloch_vec(x - e, p)) / (2.0 * h);
  }
  return jac;
}

inline bool newton_root(Eigen::Vector2d& x, const DimerParams& p, const EquilibriumOptions& opt) {
  for (int it = 0; it < opt.max_newton; ++it) {
    const Eigen::Vector2d F = bloch_vec(x, p);
    if (F.norm() < 1e-13) return true;
    const Eigen::Matrix2d jac = bloch_jacobian(x, p, opt.fd_step);
    const double det = jac.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) return false;
    const Eigen::Vector2d step = jac.partialPivLu().solve(F);
    x -= step;
    x(1) = wrap_angle(x(1));
    if (!(x(0) > 1e-6 && x(0) < std::numbers::pi - 1e-6)) return false;
    if (step.norm() < 1e-15) break;
  }
  return bloch_vec(x, p).norm() < opt.residual_tol;
}

inline std::vector<Eigen::Vector2d> grid_roots(const DimerParams& p, const EquilibriumOptions& opt, int grid) {
  std::vector<Eigen::Vector2d> roots;
  for (int a = 0; a < grid; ++a) {
    for (int b = 0; b < grid; ++b) {
      Eigen::Vector2d x((a + 0.5) * std::numbers::pi / grid, -std::numbers::pi + (b + 0.5) * 2.0 * std::numbers::pi / grid);
      bool ok = false;
      try {
        ok = newton_root(x, p, opt);
      } catch (const SingularityError&) {
        ok = false;
      }
      if (!ok) continue;
      const double res = bloch_vec(x, p).norm();
      if (!(res < opt.residual_tol)) continue;
      const bool dup = std::any_of(roots.begin(), roots.end(), [&](const Eigen::Vector2d& r) {
        return std::abs(r(0) - x(0)) < opt.dedup && std::abs(wrap_angle(r(1) - x(1))) < opt.dedup;
      });
      if (!dup) roots.push_back(x);
    }
  }
  return roots;
}

}  // namespace detail

/// All equilibria found by Newton iteration from a theta-phi seed grid,
/// classified by the eigenvalues of a finite-difference Jacobian. A coarser
/// grid is run as a cross-check; on disagreement the grid is doubled.
inline std::vector<Equilibrium> find_equilibria(const DimerParams& p, const EquilibriumOptions& opt = {}) {
  if (p.A != 0.0) throw InvalidParameter("find_equilibria: requires A = 0");
  auto roots = detail::grid_roots(p, opt, opt.grid);
  const auto coarse = detail::grid_roots(p, opt, opt.grid / 2);
  if (coarse.size() != roots.size()) {
    auto fine = detail::grid_roots(p, opt, opt.grid * 2);
    for (const auto& extra : {coarse, roots})
      for (const auto& x : extra) {
        const bool dup = std::any_of(fine.begin(), fine.end(), [&](const Eigen::Vector2d& r) {
          return std::abs(r(0) - x(0)) < opt.dedup && std::abs(wrap_angle(r(1) - x(1))) < opt.dedup;
        });
        if (!dup) fine.push_back(x);
      }
    roots = std::move(fine);
  }
  std::sort(roots.begin(), roots.end(), [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return detail::bloch_vec(a, p).norm() < detail::bloch_vec(b, p).norm();
  });
  std::vector<Eigen::Vector2d> kept;
  for (const auto& x : roots) {
    const bool near = std::any_of(kept.begin(), kept.end(), [&](const Eigen::Vector2d& r) {
      return std::hypot(r(0) - x(0), wrap_angle(r(1) - x(1))) < opt.merge;
    });
    if (!near) kept.push_back(x);
  }
  roots = std::move(kept);

  std::vector<Equilibrium> out;
  for (const auto& x : roots) {
    Equilibrium e;
    e.state = {x(0), x(1)};
    e.residual = detail::bloch_vec(x, p).norm();
    const Eigen::Matrix2d jac = detail::bloch_jacobian(x, p, opt.fd_step);
    const double tr = jac.trace();
    const Complex disc = std::sqrt(Complex(tr * tr - 4.0 * jac.determinant()));
    e.jacobian_eigenvalues = {0.5 * (tr + disc), 0.5 * (tr - disc)};
    const double re = std::max(e.jacobian_eigenvalues[0].real(), e.jacobian_eigenvalues[1].real());
    e.stability = re < -opt.stability_tol ? Stability::Stable
                  : re > opt.stability_tol ? Stability::Unstable
                                           : Stability::Marginal;
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const Equilibrium& a, const Equilibrium& b) {
    if (a.state.theta != b.state.theta) return a.state.theta > b.state.theta;
    return a.state.phi < b.state.phi;
  });
  return out;
}

inline int count_stable(const std::vector<Equilibrium>& eq) {
  return static_cast<int>(std::count_if(eq.begin(), eq.end(), [](const Equilibrium& e) { return e.stability == Stability::Stable; }));
}

inline int count_unstable(const std::vector<Equilibrium>& eq) {
  return static_cast<int>(std::count_if(eq.begin(), eq.end(), [](const Equilibrium& e) { return e.stability == Stability::Unstable; }));
}

}  // namespace qbif
