#pragma once

// Operators of the open Bose dimer restricted to the fixed-N Fock sector.
//
// Basis index i = 0..N counts the bosons on site 1 (site 2 holds N - i).

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "qbif/error.hpp"

namespace qbif {

using Complex = std::complex<double>;
using FockOperator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Physical parameters of the driven dissipative dimer.
struct DimerParams {
  double J = 1.0;      // tunneling amplitude
  double U = 0.0;      // interaction strength (enters as 2U/N)
  double E = 0.0;      // static offset between sites
  double A = 0.0;      // drive amplitude, added during the first half period
  double T = 1.0;      // drive period
  double gamma = 0.1;  // dissipation rate (enters as gamma/N)
  int N = 50;          // boson number

  void validate() const {
    if (N < 1) throw InvalidParameter("N must be >= 1, got " + std::to_string(N));
    if (A != 0.0 && !(T > 0.0)) throw InvalidParameter("T must be > 0 when A != 0");
    if (!(gamma >= 0.0)) throw InvalidParameter("gamma must be >= 0");
    if (!std::isfinite(J) || !std::isfinite(U) || !std::isfinite(E) || !std::isfinite(A) ||
        !std::isfinite(T) || !std::isfinite(gamma))
      throw InvalidParameter("parameters must be finite");
  }

  [[nodiscard]] int dim() const noexcept { return N + 1; }
};

/// The operator set every other module is built from.
struct DimerOperators {
  int N = 0;
  FockOperator hop;  // b1^dag b2 + b2^dag b1
  FockOperator n1;
  FockOperator n2;
  FockOperator V;    // (b1^dag + b2^dag)(b1 - b2)
  FockOperator VdV;  // V^dag V

  [[nodiscard]] int dim() const noexcept { return N + 1; }
};

namespace detail {

// <i+1| b1^dag b2 |i> = sqrt((i+1)(N-i)); the integer product is exact.
inline double ladder_element(int N, int i) {
  const auto product = static_cast<std::int64_t>(i + 1) * static_cast<std::int64_t>(N - i);
  return std::sqrt(static_cast<double>(product));
}

}  // namespace detail

inline DimerOperators build_operators(int N) {
  if (N < 1) throw InvalidParameter("build_operators: N must be >= 1, got " + std::to_string(N));
  const int d = N + 1;

  // b1^dag b2 moves one boson from site 2 to site 1: |i> -> |i+1>.
  FockOperator raise1 = FockOperator::Zero(d, d);
  for (int i = 0; i < N; ++i) raise1(i + 1, i) = detail::ladder_element(N, i);
  const FockOperator raise2 = raise1.adjoint();  // b2^dag b1

  DimerOperators ops;
  ops.N = N;
  ops.n1 = FockOperator::Zero(d, d);
  ops.n2 = FockOperator::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    ops.n1(i, i) = static_cast<double>(i);
    ops.n2(i, i) = static_cast<double>(N - i);
  }
  ops.hop = raise1 + raise2;
  // (b1^dag + b2^dag)(b1 - b2) = b1^dag b1 - b1^dag b2 + b2^dag b1 - b2^dag b2
  ops.V = ops.n1 - raise1 + raise2 - ops.n2;
  ops.VdV = ops.V.adjoint() * ops.V;
  return ops;
}

/// Piecewise-constant drive: E + A on [0, T/2) and E on [T/2, T), periodic in T.
inline double drive(const DimerParams& p, double t) {
  if (p.A == 0.0) return p.E;
  if (!(p.T > 0.0)) throw InvalidParameter("drive: T must be > 0 when A != 0");
  double phase = std::fmod(t, p.T);
  if (phase < 0.0) phase += p.T;
  return phase < 0.5 * p.T ? p.E + p.A : p.E;
}

/// H = J hop + (2U/N) [n1(n1-1) + n2(n2-1)] + epsilon (n2 - n1). Diagonal in
/// the interaction and offset terms, so they are filled in directly.
inline FockOperator hamiltonian(const DimerParams& p, const DimerOperators& ops, double epsilon) {
  if (ops.N != p.N) throw DimensionMismatch("hamiltonian: operator set built for a different N");
  const int d = ops.dim();
  FockOperator H = p.J * ops.hop;
  const double g = 2.0 * p.U / static_cast<double>(p.N);
  for (int i = 0; i < d; ++i) {
    const double a = i;
    const double b = p.N - i;
    H(i, i) += g * (a * (a - 1.0) + b * (b - 1.0)) + epsilon * (b - a);
  }
  return H;
}

inline FockOperator hamiltonian(const DimerParams& p, double epsilon) {
  return hamiltonian(p, build_operators(p.N), epsilon);
}

/// Symmetric condensate with amplitudes sqrt(C(N,i) / 2^N); the dark state of V.
inline StateVector symmetric_condensate(int N) {
  if (N < 1) throw InvalidParameter("symmetric_condensate: N must be >= 1");
  StateVector s(N + 1);
  for (int i = 0; i <= N; ++i) {
    const double log_binom = std::lgamma(N + 1.0) - std::lgamma(i + 1.0) - std::lgamma(N - i + 1.0);
    s(i) = std::exp(0.5 * (log_binom - N * std::log(2.0)));
  }
  return s / s.norm();
}

}  // namespace qbif
