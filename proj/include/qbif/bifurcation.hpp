#pragma once

// Quantum bifurcations read off the diagonal of the asymptotic density
// matrix (a change in the number of its local maxima), their classical
// counterparts, and the sweeps that assemble both into diagram data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qbif/dimer_model.hpp"
#include "qbif/error.hpp"
#include "qbif/histogram.hpp"
#include "qbif/liouvillian.hpp"
#include "qbif/meanfield.hpp"
#include "qbif/parallel.hpp"
#include "qbif/spectrum.hpp"
#include "qbif/trajectories.hpp"

namespace qbif {

// ---------------------------------------------------------------------------
// Maxima along the diagonal.

struct Maxima {
  int count = 0;
  std::vector<int> indices;  // a plateau reports its middle index
};

inline Maxima diagonal_maxima(const std::vector<double>& diag, double floor = 1e-6) {
  const int n = static_cast<int>(diag.size());
  if (n < 3) throw InvalidParameter("diagonal_maxima: need at least 3 entries");
  if (std::none_of(diag.begin(), diag.end(), [&](double v) { return v > floor; }))
    throw InvalidParameter("diagonal_maxima: every entry is below the floor");
  constexpr double same = 1e-12;
  auto at = [&](int k) { return diag[static_cast<std::size_t>(k)]; };
  Maxima m;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && std::abs(at(j + 1) - at(i)) <= same) ++j;
    const double v = at(i);
    const bool left = i == 0 || at(i - 1) < v - same;
    const bool right = j == n - 1 || at(j + 1) < v - same;
    if (v > floor && left && right) m.indices.push_back((i + j) / 2);
    i = j + 1;
  }
  m.count = static_cast<int>(m.indices.size());
  return m;
}

inline std::vector<double> diagonal_of(const DensityMatrix& rho) {
  const Eigen::VectorXd d = rho.diagonal();
  return {d.data(), d.data() + d.size()};
}

// ---------------------------------------------------------------------------
// Parameter axes and grids.

enum class Axis { U, E, J };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::U: return "U";
    case Axis::E: return "E";
    case Axis::J: return "J";
  }
  return "?";
}

inline Axis parse_axis(const std::string& s) {
  if (s == "U") return Axis::U;
  if (s == "E") return Axis::E;
  if (s == "J") return Axis::J;
  throw InvalidParameter("unknown axis '" + s + "' (expected U, E or J)");
}

inline DimerParams with_axis(DimerParams p, Axis a, double v) {
  switch (a) {
    case Axis::U: p.U = v; break;
    case Axis::E: p.E = v; break;
    case Axis::J: p.J = v; break;
  }
  return p;
}

/// steps + 1 equally spaced points from lo to hi (a single point when steps == 0).
inline std::vector<double> linear_grid(double lo, double hi, int steps) {
  if (steps < 0) throw InvalidParameter("grid: steps must be >= 0");
  if (steps == 0) return {lo};
  std::vector<double> g(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / steps;
  g.back() = hi;
  return g;
}

// ---------------------------------------------------------------------------
// One-parameter stationary sweeps.

struct ClassicalBranch {
  double n = 0.0;
  Stability stability = Stability::Marginal;
};

struct DiagramColumn {
  std::string parameter;
  double value = 0.0;
  std::vector<double> diagonal;
  std::vector<int> maxima;
  double purity = 0.0;
  double residual = 0.0;
  std::vector<Complex> spectrum;  // leading Liouvillian eigenvalues, descending real part
  std::vector<ClassicalBranch> classical;
  std::string error;  // non-empty when this column failed

  [[nodiscard]] bool ok() const noexcept { return error.empty(); }
  [[nodiscard]] std::optional<double> re_lambda(int i) const {  // 1-based
    if (i < 1 || i > static_cast<int>(spectrum.size())) return std::nullopt;
    return spectrum[static_cast<std::size_t>(i - 1)].real();
  }
};

struct SweepOptions {
  double maxima_floor = 1e-6;
  int spectrum_k = 3;  // 0 skips the spectrum
  bool classical = true;
  unsigned workers = 1;
  StationaryOptions stationary{};
  SpectrumOptions spectrum{};
  EquilibriumOptions equilibria{};
};

inline std::vector<ClassicalBranch> classical_branches(const DimerParams& p, const EquilibriumOptions& opt = {}) {
  std::vector<ClassicalBranch> out;
  for (const auto& e : find_equilibria(p, opt)) out.push_back({e.n(p.N), e.stability});
  return out;
}

inline DiagramColumn stationary_column(const DimerParams& p, Axis axis, double value, const SweepOptions& opt) {
  DiagramColumn c;
  c.parameter = to_string(axis);
  c.value = value;
  try {
    const DimerParams q = with_axis(p, axis, value);
    q.validate();
    const SuperMatrix pi = build_supermatrix(q, q.E);
    const StationaryState st = stationary_state(pi, opt.stationary);
    c.diagonal = diagonal_of(st.rho);
    c.maxima = diagonal_maxima(c.diagonal, opt.maxima_floor).indices;
    c.purity = purity(st.rho);
    c.residual = st.residual;
    if (opt.spectrum_k > 0) c.spectrum = leading_spectrum(pi, opt.spectrum_k, opt.spectrum).eigenvalues;
    if (opt.classical) c.classical = classical_branches(q, opt.equilibria);
  } catch (const Error& e) {
    c.error = e.what();
  }
  return c;
}

inline std::vector<DiagramColumn> sweep_stationary(const DimerParams& p, Axis axis, const std::vector<double>& values,
                                                   const SweepOptions& opt = {}) {
  if (p.A != 0.0) throw InvalidParameter("sweep_stationary: requires A = 0");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  return parallel_map(
      sorted.size(), [&](std::size_t i) { return stationary_column(p, axis, sorted[i], opt); }, opt.workers);
}

inline std::vector<DiagramColumn> sweep_stationary(const DimerParams& p, Axis axis, double lo, double hi, int steps,
                                                   const SweepOptions& opt = {}) {
  return sweep_stationary(p, axis, linear_grid(lo, hi, steps), opt);
}

// ---------------------------------------------------------------------------
// Locating a count change.

struct BifurcationPoint {
  double value = 0.0;
  double lo = 0.0;  // final bracket
  double hi = 0.0;
  int count_before = 0;
  int count_after = 0;
  double tolerance = 0.0;  // achieved bracket width
  std::vector<std::pair<double, double>> brackets;  // every bracket visited
};

/// Bisection on a change of an integer-valued function between lo and hi.
template <class CountFn>
BifurcationPoint bisect_count(CountFn&& count, double lo, double hi, double tol = 1e-3) {
  if (!(hi > lo)) throw InvalidParameter("bisect_count: need lo < hi");
  if (!(tol > 0.0)) throw InvalidParameter("bisect_count: tolerance must be > 0");
  const int c_lo = count(lo);
  const int c_hi = count(hi);
  if (c_lo == c_hi) throw InvalidParameter("invalid bracket: equal counts at both ends");
  BifurcationPoint b;
  b.brackets.emplace_back(lo, hi);
  int c_right = c_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const int c = count(mid);
    if (c == c_lo) {
      lo = mid;
    } else {
      hi = mid;
      c_right = c;
    }
    b.brackets.emplace_back(lo, hi);
  }
  b.lo = lo;
  b.hi = hi;
  b.value = 0.5 * (lo + hi);
  b.count_before = c_lo;
  b.count_after = c_right;
  b.tolerance = hi - lo;
  return b;
}

inline int quantum_maxima_count(const DimerParams& p, double floor = 1e-6, const StationaryOptions& opt = {}) {
  const StationaryState st = stationary_state(build_supermatrix(p, p.E), opt);
  return diagonal_maxima(diagonal_of(st.rho), floor).count;
}

inline int classical_stable_count(const DimerParams& p, const EquilibriumOptions& opt = {}) {
  return count_stable(find_equilibria(p, opt));
}

inline BifurcationPoint locate_bifurcation(const DimerParams& p, Axis axis, double lo, double hi, double tol = 1e-3,
                                           double floor = 1e-6) {
  return bisect_count([&](double v) { return quantum_maxima_count(with_axis(p, axis, v), floor); }, lo, hi, tol);
}

inline BifurcationPoint locate_classical_bifurcation(const DimerParams& p, Axis axis, double lo, double hi,
                                                     double tol = 1e-3) {
  return bisect_count([&](double v) { return classical_stable_count(with_axis(p, axis, v)); }, lo, hi, tol);
}

// ---------------------------------------------------------------------------
// Two-parameter diagrams.

struct RegionLabel {
  int stable = 0;
  int unstable = 0;

  friend bool operator==(const RegionLabel&, const RegionLabel&) = default;
  [[nodiscard]] int code() const noexcept { return 1000 * stable + unstable; }
  [[nodiscard]] std::string str() const {
    return "(S" + std::to_string(stable) + ",U" + std::to_string(unstable) + ")";
  }
};

inline RegionLabel classical_label(const DimerParams& p, const EquilibriumOptions& opt = {}) {
  const auto eq = find_equilibria(p, opt);
  return {count_stable(eq), count_unstable(eq)};
}

struct GridCell {
  double v1 = 0.0;
  double v2 = 0.0;
  int quantum_maxima = -1;  // -1 on failure
  RegionLabel classical{-1, -1};
  std::string error;
};

struct BoundaryPoint {
  double v1 = 0.0;  // refined along axis 1
  double v2 = 0.0;
  int before = 0;   // count (quantum) or label code (classical) at the lower axis-1 side
  int after = 0;
  double tolerance = 0.0;
};

struct TwoParameterDiagram {
  Axis axis1 = Axis::U;
  Axis axis2 = Axis::E;
  std::vector<double> grid1;
  std::vector<double> grid2;
  std::vector<GridCell> cells;  // row-major: index i2 * grid1.size() + i1
  std::vector<BoundaryPoint> quantum_boundary;
  std::vector<BoundaryPoint> classical_boundary;

  [[nodiscard]] const GridCell& cell(std::size_t i1, std::size_t i2) const { return cells[i2 * grid1.size() + i1]; }
};

struct TwoParameterOptions {
  double maxima_floor = 1e-6;
  double refine_tol = 1e-3;
  bool quantum = true;
  bool classical = true;
  unsigned workers = 1;
  EquilibriumOptions equilibria{};
};

inline TwoParameterDiagram two_parameter_diagram(const DimerParams& p, Axis axis1, const std::vector<double>& grid1,
                                                 Axis axis2, const std::vector<double>& grid2,
                                                 const TwoParameterOptions& opt = {}) {
  if (p.A != 0.0) throw InvalidParameter("two_parameter_diagram: requires A = 0");
  if (axis1 == axis2) throw InvalidParameter("two_parameter_diagram: axes must differ");
  TwoParameterDiagram d;
  d.axis1 = axis1;
  d.axis2 = axis2;
  d.grid1 = grid1;
  d.grid2 = grid2;
  std::sort(d.grid1.begin(), d.grid1.end());
  std::sort(d.grid2.begin(), d.grid2.end());
  const std::size_t n1 = d.grid1.size();
  const std::size_t n2 = d.grid2.size();
  auto at = [&](double v1, double v2) { return with_axis(with_axis(p, axis1, v1), axis2, v2); };

  d.cells = parallel_map(
      n1 * n2,
      [&](std::size_t k) {
        GridCell c;
        c.v1 = d.grid1[k % n1];
        c.v2 = d.grid2[k / n1];
        try {
          const DimerParams q = at(c.v1, c.v2);
          q.validate();
          if (opt.quantum) c.quantum_maxima = quantum_maxima_count(q, opt.maxima_floor);
          if (opt.classical) c.classical = classical_label(q, opt.equilibria);
        } catch (const Error& e) {
          c.error = e.what();
        }
        return c;
      },
      opt.workers);

  struct Task {
    std::size_t i1;
    std::size_t i2;
    bool quantum;
  };
  std::vector<Task> tasks;
  for (std::size_t i2 = 0; i2 < n2; ++i2)
    for (std::size_t i1 = 0; i1 + 1 < n1; ++i1) {
      const GridCell& a = d.cell(i1, i2);
      const GridCell& b = d.cell(i1 + 1, i2);
      if (!a.error.empty() || !b.error.empty()) continue;
      if (opt.quantum && a.quantum_maxima != b.quantum_maxima) tasks.push_back({i1, i2, true});
      if (opt.classical && !(a.classical == b.classical)) tasks.push_back({i1, i2, false});
    }

  const auto refined = parallel_map(
      tasks.size(),
      [&](std::size_t k) -> std::optional<BoundaryPoint> {
        const Task& t = tasks[k];
        const double v2 = d.grid2[t.i2];
        try {
          BifurcationPoint b;
          if (t.quantum)
            b = bisect_count([&](double v) { return quantum_maxima_count(at(v, v2), opt.maxima_floor); },
                             d.grid1[t.i1], d.grid1[t.i1 + 1], opt.refine_tol);
          else
            b = bisect_count([&](double v) { return classical_label(at(v, v2), opt.equilibria).code(); },
                             d.grid1[t.i1], d.grid1[t.i1 + 1], opt.refine_tol);
          return BoundaryPoint{b.value, v2, b.count_before, b.count_after, b.tolerance};
        } catch (const Error&) {
          return std::nullopt;
        }
      },
      opt.workers);
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (!refined[k]) continue;
    (tasks[k].quantum ? d.quantum_boundary : d.classical_boundary).push_back(*refined[k]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Driven system: stroboscopic histograms.

struct ChaosColumn {
  double value = 0.0;
  Histogram histogram;
  int clusters = 0;           // classical only
  std::vector<std::uint64_t> seeds;  // quantum only
  std::string error;
};

struct ChaosOptions {
  int transient = 2000;
  int record = 2000;
  int bins = 200;
  double cluster_gap = 1e-4;  // in units of N
  unsigned workers = 1;
  // classical
  BlochState start = kDefaultDrivenStart;
  double dt = 0.0;  // 0 selects T/200
  // quantum
  int realizations = 8;
  std::uint64_t base_seed = 1;
  std::optional<StateVector> psi0;  // default: symmetric condensate
  TrajectoryOptions trajectory{};
};

inline std::vector<ChaosColumn> chaos_diagram_classical(const DimerParams& p, const std::vector<double>& u_values,
                                                        const ChaosOptions& opt = {}) {
  if (p.A == 0.0) throw InvalidParameter("chaos_diagram_classical: requires A != 0");
  std::vector<double> us = u_values;
  std::sort(us.begin(), us.end());
  return parallel_map(
      us.size(),
      [&](std::size_t i) {
        ChaosColumn c;
        c.value = us[i];
        try {
          const auto s = stroboscopic_samples(with_axis(p, Axis::U, us[i]), opt.start, opt.transient, opt.record, opt.dt);
          c.histogram = build_histogram(s, p.N, opt.bins);
          c.clusters = cluster_count(s, opt.cluster_gap * p.N);
        } catch (const Error& e) {
          c.error = e.what();
        }
        return c;
      },
      opt.workers);
}

inline std::vector<ChaosColumn> chaos_diagram_quantum(const DimerParams& p, const std::vector<double>& u_values,
                                                      const ChaosOptions& opt = {}) {
  if (p.A == 0.0) throw InvalidParameter("chaos_diagram_quantum: requires A != 0");
  if (!(p.gamma > 0.0)) throw InvalidParameter("chaos_diagram_quantum: requires gamma > 0");
  if (opt.realizations < 1) throw InvalidParameter("chaos_diagram_quantum: need at least one realization");
  std::vector<double> us = u_values;
  std::sort(us.begin(), us.end());
  const StateVector psi0 = opt.psi0 ? *opt.psi0 : symmetric_condensate(p.N);
  const auto r = static_cast<std::size_t>(opt.realizations);

  // One task per (U, realization); the pool is reduced per U in seed order.
  struct Run {
    std::vector<double> values;
    std::string error;
  };
  const auto runs = parallel_map(
      us.size() * r,
      [&](std::size_t k) {
        Run out;
        try {
          out.values = run_trajectory(psi0, with_axis(p, Axis::U, us[k / r]), opt.transient, opt.record,
                                      trajectory_seed(opt.base_seed, k % r), opt.trajectory)
                           .values;
        } catch (const Error& e) {
          out.error = e.what();
        }
        return out;
      },
      opt.workers);

  std::vector<ChaosColumn> cols(us.size());
  for (std::size_t i = 0; i < us.size(); ++i) {
    ChaosColumn& c = cols[i];
    c.value = us[i];
    std::vector<std::vector<double>> pool;
    for (std::size_t j = 0; j < r; ++j) {
      c.seeds.push_back(trajectory_seed(opt.base_seed, j));
      const Run& run = runs[i * r + j];
      if (!run.error.empty() && c.error.empty()) c.error = run.error;
      pool.push_back(run.values);
    }
    if (!c.error.empty()) continue;
    try {
      c.histogram = build_histogram(pool, p.N, opt.bins);
    } catch (const Error& e) {
      c.error = e.what();
    }
  }
  return cols;
}

}  // namespace qbif
