#pragma once

// Rightmost eigenvalues of the Liouvillian.
//
// Small supermatrices are diagonalized densely. Larger ones are scanned with
// shift-invert Arnoldi: shifts march up the imaginary axis and each trusted
// disc of converged Ritz values certifies a slab of the strip
// Re(lambda) in [r_k, 0], where r_k is the k-th largest real part found so
// far. The spectrum is closed under conjugation, so only Im >= 0 is scanned.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#ifdef QBIF_HAVE_KLU
#include <klu.h>
#endif

#include "qbif/error.hpp"
#include "qbif/liouvillian.hpp"

namespace qbif {

struct SpectrumOptions {
  int dense_threshold = 200;  // dims at or below use a dense eigensolve
  double residual_tol = 1e-9;
  double trust_tol = 1e-6;  // residual accepted when certifying coverage
  int krylov_dim = 60;
  int max_krylov_dim = 320;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

struct SpectrumResult {
  std::vector<Complex> eigenvalues;  // descending real part
  double max_residual = 0.0;
  int shifts = 0;  // shift-invert factorizations used (0 for dense)
  bool dense = true;

  [[nodiscard]] int count() const noexcept { return static_cast<int>(eigenvalues.size()); }
};

namespace detail {

inline bool by_real_desc(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

inline SpectrumResult dense_spectrum(const SuperMatrix& pi, int k) {
  const Eigen::MatrixXcd m = Eigen::MatrixXcd(pi.matrix);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, true);
  if (es.info() != Eigen::Success) throw NumericalFailure("leading_spectrum: dense eigensolver failed", 0.0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return by_real_desc(es.eigenvalues()(a), es.eigenvalues()(b));
  });
  SpectrumResult out;
  for (int j = 0; j < k; ++j) {
    const Eigen::Index idx = order[static_cast<std::size_t>(j)];
    const Complex lam = es.eigenvalues()(idx);
    const Eigen::VectorXcd v = es.eigenvectors().col(idx).normalized();
    out.max_residual = std::max(out.max_residual, (m * v - lam * v).norm());
    out.eigenvalues.push_back(lam);
  }
  return out;
}

struct RitzPair {
  Complex lambda;
  double distance;  // |lambda - sigma|
  bool converged;  // meets the reporting tolerance
  bool trusted;    // accurate enough to rule out a missed eigenvalue nearby
  double residual;
};

// LU of Pi - sigma for a sequence of shifts with a fixed sparsity pattern.
// KLU's plain column-oriented triangular solves are about twice as fast as
// SparseLU's supernodal ones on these matrices; SparseLU is the fallback.
#ifdef QBIF_HAVE_KLU
class ShiftedLU {
 public:
  explicit ShiftedLU(const SparseComplex& a) : n_(static_cast<int>(a.rows())) {
    klu_defaults(&common_);
    common_.btf = 0;
    symbolic_ = klu_analyze(n_, const_cast<int*>(a.outerIndexPtr()), const_cast<int*>(a.innerIndexPtr()), &common_);
    if (!symbolic_) throw NumericalFailure("leading_spectrum: symbolic analysis failed");
  }
  ShiftedLU(const ShiftedLU&) = delete;
  ShiftedLU& operator=(const ShiftedLU&) = delete;
  ~ShiftedLU() {
    if (numeric_) klu_z_free_numeric(&numeric_, &common_);
    klu_free_symbolic(&symbolic_, &common_);
  }

  void factorize(const SparseComplex& a) {
    if (numeric_) klu_z_free_numeric(&numeric_, &common_);
    numeric_ = klu_z_factor(const_cast<int*>(a.outerIndexPtr()), const_cast<int*>(a.innerIndexPtr()),
                            const_cast<double*>(reinterpret_cast<const double*>(a.valuePtr())), symbolic_, &common_);
    if (!numeric_) throw NumericalFailure("leading_spectrum: shifted factorization failed");
  }

  void solve_in_place(Eigen::VectorXcd& x) {
    if (!klu_z_solve(symbolic_, numeric_, n_, 1, reinterpret_cast<double*>(x.data()), &common_))
      throw NumericalFailure("leading_spectrum: triangular solve failed");
  }

 private:
  int n_;
  klu_common common_{};
  klu_symbolic* symbolic_ = nullptr;
  klu_numeric* numeric_ = nullptr;
};
#else
class ShiftedLU {
 public:
  explicit ShiftedLU(const SparseComplex& a) { lu_.analyzePattern(a); }

  void factorize(const SparseComplex& a) {
    lu_.factorize(a);
    if (lu_.info() != Eigen::Success) throw NumericalFailure("leading_spectrum: shifted factorization failed");
  }

  void solve_in_place(Eigen::VectorXcd& x) { x = lu_.solve(x).eval(); }

 private:
  Eigen::SparseLU<SparseComplex, Eigen::COLAMDOrdering<int>> lu_;
};
#endif

// Shift-invert Arnoldi with full reorthogonalization around one shift.
class ShiftInvertArnoldi {
 public:
  explicit ShiftInvertArnoldi(const SparseComplex& pi) : pi_(pi), shifted_(pi) {
    shifted_.makeCompressed();
    for (Eigen::Index k = 0; k < shifted_.rows(); ++k) diag_.push_back(&shifted_.coeffRef(k, k));
    base_diag_.reserve(diag_.size());
    for (const Complex* p : diag_) base_diag_.push_back(*p);
    lu_.emplace(shifted_);
  }

  std::vector<RitzPair> run(Complex sigma, int m, std::uint64_t seed, double tol, double trust_tol) {
    for (std::size_t k = 0; k < diag_.size(); ++k) *diag_[k] = base_diag_[k] - sigma;
    lu_->factorize(shifted_);

    const Eigen::Index n = pi_.rows();
    m = static_cast<int>(std::min<Eigen::Index>(m, n));
    Eigen::MatrixXcd Q(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) Q(i, 0) = Complex(u(rng), u(rng));
    Q.col(0).normalize();

    int used = m;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXcd w = Q.col(j);
      lu_->solve_in_place(w);
      // Classical Gram-Schmidt; a second pass only when cancellation was severe.
      const double before = w.norm();
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXcd h = Q.leftCols(j + 1).adjoint() * w;
        w -= Q.leftCols(j + 1) * h;
        H.col(j).head(j + 1) += h;
        if (w.norm() > 0.7 * before) break;
      }
      const double beta = w.norm();
      H(j + 1, j) = beta;
      if (beta < 1e-13 * std::max(1.0, H.col(j).head(j + 1).norm())) {
        used = j + 1;
        break;
      }
      Q.col(j + 1) = w / beta;
    }

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(used, used), true);
    std::vector<int> order;
    for (int r = 0; r < used; ++r)
      if (std::abs(es.eigenvalues()(r)) > 1e-300) order.push_back(r);
    auto dist = [&](int r) { return 1.0 / std::abs(es.eigenvalues()(r)); };
    std::sort(order.begin(), order.end(), [&](int a, int b) { return dist(a) < dist(b); });

    // True residuals, nearest first. Coverage only needs the trusted prefix,
    // so the remaining pairs are skipped once one fails the trust test.
    std::vector<RitzPair> out;
    constexpr int kBatch = 8;
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      const int cnt = static_cast<int>(std::min<std::size_t>(kBatch, order.size() - start));
      Eigen::MatrixXcd Y(used, cnt);
      for (int c = 0; c < cnt; ++c) Y.col(c) = es.eigenvectors().col(order[start + static_cast<std::size_t>(c)]);
      Eigen::MatrixXcd X = Q.leftCols(used) * Y;
      X.colwise().normalize();
      const Eigen::MatrixXcd PX = pi_ * X;
      bool stop = false;
      for (int c = 0; c < cnt; ++c) {
        const Complex theta = es.eigenvalues()(order[start + static_cast<std::size_t>(c)]);
        const Complex from_shift = sigma + 1.0 / theta;
        const Complex rayleigh = X.col(c).dot(PX.col(c));
        const double r_shift = (PX.col(c) - from_shift * X.col(c)).norm();
        const double r_ray = (PX.col(c) - rayleigh * X.col(c)).norm();
        const Complex lam = r_ray < r_shift ? rayleigh : from_shift;
        const double res = std::min(r_ray, r_shift);
        const double scale = std::max(1.0, std::abs(lam));
        out.push_back({lam, std::abs(lam - sigma), res <= tol * scale, res <= trust_tol * scale, res});
        if (!out.back().trusted) stop = true;
      }
      if (stop) break;
    }
    std::sort(out.begin(), out.end(), [](const RitzPair& a, const RitzPair& b) { return a.distance < b.distance; });
    return out;
  }

 private:
  const SparseComplex& pi_;
  SparseComplex shifted_;
  std::vector<Complex*> diag_;
  std::vector<Complex> base_diag_;
  std::optional<ShiftedLU> lu_;
};

// Upper bound on |Im lambda| from the numerical range of Pi.
inline double imaginary_extent(const SparseComplex& pi) {
  const SparseComplex adj = SparseComplex(pi.adjoint());
  const SparseComplex skew = (pi - adj) * Complex(0.0, -0.5);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(skew.rows());
  Eigen::VectorXd col = Eigen::VectorXd::Zero(skew.cols());
  for (int k = 0; k < skew.outerSize(); ++k)
    for (SparseComplex::InnerIterator it(skew, k); it; ++it) {
      row(it.row()) += std::abs(it.value());
      col(it.col()) += std::abs(it.value());
    }
  return std::sqrt(row.maxCoeff() * col.maxCoeff());
}

// Distinct eigenvalue estimates. Entries closer than the merge radius are
// treated as one; the more accurate estimate is kept.
class EigenvalueSet {
 public:
  struct Item {
    Complex value;
    double residual;
  };

  explicit EigenvalueSet(double rel_merge) : rel_merge_(rel_merge) {}

  void add(const RitzPair& r, double merge_floor = 0.0) {
    insert(r.lambda, r.residual, merge_floor);
    if (std::abs(r.lambda.imag()) > 1e-10 * std::max(1.0, std::abs(r.lambda)))
      insert(std::conj(r.lambda), r.residual, merge_floor);
  }

  // k-th largest real part, or -inf when fewer than k are known.
  [[nodiscard]] double kth_real(int k) const {
    if (static_cast<int>(items_.size()) < k) return -std::numeric_limits<double>::infinity();
    std::vector<double> re;
    re.reserve(items_.size());
    for (const auto& v : items_) re.push_back(v.value.real());
    std::nth_element(re.begin(), re.begin() + (k - 1), re.end(), std::greater<>());
    return re[static_cast<std::size_t>(k - 1)];
  }

  [[nodiscard]] std::vector<Item> top(int k) const {
    std::vector<Item> v = items_;
    std::sort(v.begin(), v.end(), [](const Item& x, const Item& y) { return by_real_desc(x.value, y.value); });
    v.resize(std::min<std::size_t>(v.size(), static_cast<std::size_t>(k)));
    return v;
  }

  [[nodiscard]] const std::vector<Item>& items() const noexcept { return items_; }

 private:
  void insert(Complex z, double residual, double merge_floor) {
    const double radius = std::max(rel_merge_ * std::max(1.0, std::abs(z)), merge_floor);
    for (auto& v : items_)
      if (std::abs(v.value - z) <= radius) {
        if (residual < v.residual) v = {z, residual};
        return;
      }
    items_.push_back({z, residual});
  }

  double rel_merge_;
  std::vector<Item> items_;
};

inline SpectrumResult scanned_spectrum(const SuperMatrix& pi, int k, const SpectrumOptions& opt) {
  ShiftInvertArnoldi arnoldi(pi.matrix);
  EigenvalueSet accurate(1e-7);  // residual <= residual_tol
  EigenvalueSet coarse(1e-7);    // residual <= trust_tol, loosely merged
  const double extent = imaginary_extent(pi.matrix);
  int krylov = opt.krylov_dim;
  int shifts = 0;
  double covered = 0.0;  // Im range [0, covered] of the strip is certified
  double omega = 0.0;
  double re_shift = 1e-3;
  bool first = true;

  auto run = [&](Complex sigma, int m) {
    auto ritz = arnoldi.run(sigma, m, opt.seed + static_cast<std::uint64_t>(shifts), opt.residual_tol, opt.trust_tol);
    ++shifts;
    for (const auto& r : ritz) {
      if (r.converged) accurate.add(r);
      if (r.trusted) coarse.add(r, 100.0 * r.residual);
    }
    return ritz;
  };

  while (first || covered < extent) {
    const auto ritz = run(Complex(re_shift, omega), krylov);
    double trusted = 0.0;
    for (const auto& r : ritz) {
      if (!r.trusted) break;
      trusted = r.distance;
    }

    const double rk = coarse.kth_real(k);
    const double half_width = std::max(std::abs(re_shift - rk), std::abs(re_shift));
    const double reach = trusted > half_width ? std::sqrt(trusted * trusted - half_width * half_width) : 0.0;
    if (!std::isfinite(rk) || reach < 1e-6 * std::max(1.0, extent)) {
      if (krylov >= opt.max_krylov_dim)
        throw NumericalFailure("leading_spectrum: shift-invert scan could not certify coverage", trusted);
      krylov = std::min(opt.max_krylov_dim, 2 * krylov);
      continue;
    }
    covered = omega + reach;
    first = false;
    omega = covered;
    re_shift = 0.5 * rk;
    krylov = opt.krylov_dim;
  }

  // Candidates that may belong to the top k but are not yet accurate enough
  // get a targeted shift of their own.
  const double cutoff = accurate.kth_real(k);
  for (const auto& c : coarse.items()) {
    if (c.residual <= opt.residual_tol * std::max(1.0, std::abs(c.value))) continue;
    if (std::isfinite(cutoff) && c.value.real() < cutoff - 1e-6) continue;
    const double offset = 1e-6 * std::max(1.0, std::abs(c.value));
    run(c.value + Complex(offset, offset), 30);
  }

  const auto best = accurate.top(k);
  if (static_cast<int>(best.size()) < k)
    throw NumericalFailure("leading_spectrum: fewer than k eigenvalues converged", static_cast<double>(best.size()));
  SpectrumResult out;
  for (const auto& b : best) {
    out.eigenvalues.push_back(b.value);
    out.max_residual = std::max(out.max_residual, b.residual);
  }
  out.shifts = shifts;
  out.dense = false;
  return out;
}

}  // namespace detail

/// The k eigenvalues of the supermatrix with the largest real parts, sorted by
/// descending real part.
inline SpectrumResult leading_spectrum(const SuperMatrix& pi, int k, const SpectrumOptions& opt = {}) {
  if (k < 1 || k > pi.dim()) throw InvalidParameter("leading_spectrum: need 1 <= k <= dim");
  if (pi.dim() <= opt.dense_threshold) return detail::dense_spectrum(pi, k);
  return detail::scanned_spectrum(pi, k, opt);
}

}  // namespace qbif
