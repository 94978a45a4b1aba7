#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "output.hpp"
#include "qbif/qbif.hpp"

namespace qbif::cli {

struct Result {
  std::vector<Table> tables;
  json metadata = json::object();
};

inline json complex_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

inline void require_static(const RunConfig& c) {
  if (c.params.A != 0.0) throw UsageError(c.command + " requires A = 0");
}

inline Result cmd_stationary(const RunConfig& c) {
  require_static(c);
  StationaryOptions so;
  so.residual_tol = c.residual_tol;
  const SuperMatrix pi = build_supermatrix(c.params, c.params.E);
  const StationaryState st = stationary_state(pi, so);
  const auto diag = diagonal_of(st.rho);
  const Maxima mx = diagonal_maxima(diag, c.maxima_floor);

  Result r;
  Table d{"diagonal", {"n", "rho_nn", "is_max"}, {}};
  for (std::size_t n = 0; n < diag.size(); ++n) {
    const bool is_max = std::find(mx.indices.begin(), mx.indices.end(), static_cast<int>(n)) != mx.indices.end();
    d.add({static_cast<long long>(n), diag[n], static_cast<long long>(is_max)});
  }
  Table rho{"rho", {"m", "n", "re", "im"}, {}};
  const auto& m = st.rho.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      rho.add({static_cast<long long>(i), static_cast<long long>(j), m(i, j).real(), m(i, j).imag()});
  r.tables = {std::move(d), std::move(rho)};

  r.metadata["purity"] = purity(st.rho);
  r.metadata["residual"] = st.residual;
  r.metadata["min_eigenvalue"] = st.min_eigenvalue;
  r.metadata["used_fallback"] = st.used_fallback;
  r.metadata["maxima"] = mx.indices;
  if (c.spectrum_k > 0) {
    const auto sp = leading_spectrum(pi, c.spectrum_k, SpectrumOptions{});
    Table s{"spectrum", {"index", "re", "im"}, {}};
    for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i)
      s.add({static_cast<long long>(i + 1), sp.eigenvalues[i].real(), sp.eigenvalues[i].imag()});
    r.tables.push_back(std::move(s));
    r.metadata["spectrum_max_residual"] = sp.max_residual;
  }
  return r;
}

inline Result cmd_spectrum(const RunConfig& c) {
  require_static(c);
  if (c.spectrum_k < 1) throw UsageError("spectrum needs --spectrum-k >= 1");
  const SuperMatrix pi = build_supermatrix(c.params, c.params.E);
  const auto sp = leading_spectrum(pi, c.spectrum_k, SpectrumOptions{});
  Result r;
  Table s{"spectrum", {"index", "re", "im"}, {}};
  for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i)
    s.add({static_cast<long long>(i + 1), sp.eigenvalues[i].real(), sp.eigenvalues[i].imag()});
  r.tables.push_back(std::move(s));
  r.metadata["max_residual"] = sp.max_residual;
  r.metadata["dense"] = sp.dense;
  r.metadata["shifts"] = sp.shifts;
  return r;
}

inline Result cmd_sweep1d(const RunConfig& c) {
  require_static(c);
  const Axis axis = parse_axis(c.axis);
  SweepOptions so;
  so.maxima_floor = c.maxima_floor;
  so.spectrum_k = c.spectrum_k;
  so.workers = resolve_workers(c.workers);
  so.stationary.residual_tol = c.residual_tol;
  const auto cols = sweep_stationary(c.params, axis, c.range.lo, c.range.hi, c.steps, so);

  Result r;
  Table diagram{"diagram", {c.axis, "n", "rho_nn", "is_max"}, {}};
  Table classical{"classical", {c.axis, "n", "stability"}, {}};
  Table summary{"columns", {c.axis, "maxima", "purity", "re_lambda1", "re_lambda2", "re_lambda3", "residual", "error"}, {}};
  json per_column = json::array();
  for (const auto& col : cols) {
    for (std::size_t n = 0; n < col.diagonal.size(); ++n) {
      const bool is_max = std::find(col.maxima.begin(), col.maxima.end(), static_cast<int>(n)) != col.maxima.end();
      diagram.add({col.value, static_cast<long long>(n), col.diagonal[n], static_cast<long long>(is_max)});
    }
    json eq = json::array();
    for (const auto& b : col.classical) {
      classical.add({col.value, b.n, std::string(to_string(b.stability))});
      eq.push_back({{"n", b.n}, {"stability", to_string(b.stability)}});
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    summary.add({col.value, static_cast<long long>(col.ok() ? static_cast<long long>(col.maxima.size()) : -1),
                 col.ok() ? col.purity : nan, col.re_lambda(1).value_or(nan), col.re_lambda(2).value_or(nan),
                 col.re_lambda(3).value_or(nan), col.ok() ? col.residual : nan, col.error});
    json spec = json::array();
    for (const auto& z : col.spectrum) spec.push_back(complex_json(z));
    per_column.push_back({{c.axis, col.value},
                          {"maxima", col.maxima},
                          {"purity", col.ok() ? json(col.purity) : json(nullptr)},
                          {"spectrum", spec},
                          {"classical", eq},
                          {"error", col.error}});
  }

  // Count changes between neighbouring columns, refined by bisection.
  json points = json::array();
  for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
    const auto& a = cols[i];
    const auto& b = cols[i + 1];
    if (!a.ok() || !b.ok()) continue;
    auto refine = [&](const char* model, auto&& fn) {
      try {
        const BifurcationPoint bp = fn();
        points.push_back({{"model", model},
                          {c.axis, bp.value},
                          {"before", bp.count_before},
                          {"after", bp.count_after},
                          {"tolerance", bp.tolerance}});
      } catch (const Error& e) {
        points.push_back({{"model", model}, {"bracket", {a.value, b.value}}, {"error", e.what()}});
      }
    };
    if (a.maxima.size() != b.maxima.size())
      refine("quantum", [&] { return locate_bifurcation(c.params, axis, a.value, b.value, c.bisect_tol, c.maxima_floor); });
    auto stable = [](const DiagramColumn& col) {
      return std::count_if(col.classical.begin(), col.classical.end(),
                           [](const ClassicalBranch& br) { return br.stability == Stability::Stable; });
    };
    if (stable(a) != stable(b))
      refine("classical", [&] { return locate_classical_bifurcation(c.params, axis, a.value, b.value, c.bisect_tol); });
  }
  r.tables = {std::move(diagram), std::move(classical), std::move(summary)};
  r.metadata["columns"] = std::move(per_column);
  r.metadata["bifurcations"] = std::move(points);
  return r;
}

inline Result cmd_sweep2d(const RunConfig& c) {
  require_static(c);
  const Axis a1 = parse_axis(c.axis);
  const Axis a2 = parse_axis(c.axis2);
  TwoParameterOptions opt;
  opt.maxima_floor = c.maxima_floor;
  opt.refine_tol = c.bisect_tol;
  opt.workers = resolve_workers(c.workers);
  const auto d = two_parameter_diagram(c.params, a1, linear_grid(c.range.lo, c.range.hi, c.steps), a2,
                                       linear_grid(c.range2.lo, c.range2.hi, c.steps2), opt);
  Result r;
  Table cells{"cells", {c.axis, c.axis2, "quantum_maxima", "stable", "unstable", "label", "error"}, {}};
  for (const auto& cell : d.cells)
    cells.add({cell.v1, cell.v2, static_cast<long long>(cell.quantum_maxima),
               static_cast<long long>(cell.classical.stable), static_cast<long long>(cell.classical.unstable),
               cell.error.empty() ? cell.classical.str() : std::string(), cell.error});
  Table boundary{"boundary", {"model", c.axis, c.axis2, "before", "after", "tolerance"}, {}};
  auto label = [](int code) { return RegionLabel{code / 1000, code % 1000}.str(); };
  json bj = json::array();
  for (const auto& b : d.quantum_boundary) {
    boundary.add({std::string("quantum"), b.v1, b.v2, std::to_string(b.before), std::to_string(b.after), b.tolerance});
    bj.push_back({{"model", "quantum"}, {c.axis, b.v1}, {c.axis2, b.v2}, {"before", b.before}, {"after", b.after}});
  }
  for (const auto& b : d.classical_boundary) {
    boundary.add({std::string("classical"), b.v1, b.v2, label(b.before), label(b.after), b.tolerance});
    bj.push_back({{"model", "classical"}, {c.axis, b.v1}, {c.axis2, b.v2}, {"before", label(b.before)}, {"after", label(b.after)}});
  }
  r.tables = {std::move(cells), std::move(boundary)};
  r.metadata["boundaries"] = std::move(bj);
  return r;
}

inline Result cmd_meanfield(const RunConfig& c) {
  const DimerParams& p = c.params;
  const double dt = c.dt > 0.0 ? c.dt : (p.A != 0.0 ? p.T / 200.0 : 0.005);
  const int samples = std::max(c.steps, 1);
  std::vector<double> times = linear_grid(0.0, c.t_end, samples);
  const auto traj = integrate_meanfield(BlochState{c.theta, c.phi}, p, c.t_end, dt, times);
  Result r;
  Table t{"trajectory", {"t", "Sx", "Sy", "Sz", "theta", "phi", "n"}, {}};
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const SpinState& s = traj.states[i];
    const BlochState b = to_bloch(s);
    t.add({traj.times[i], s.x, s.y, s.z, b.theta, b.phi, particle_number(b.theta, p.N)});
  }
  r.tables.push_back(std::move(t));
  r.metadata["max_shell_drift"] = traj.max_shell_drift;
  r.metadata["step"] = dt;
  if (p.A == 0.0) {
    Table e{"equilibria", {"theta", "phi", "n", "stability", "mu1_re", "mu1_im", "mu2_re", "mu2_im"}, {}};
    for (const auto& q : find_equilibria(p)) {
      e.add({q.state.theta, q.state.phi, q.n(p.N), std::string(to_string(q.stability)),
             q.jacobian_eigenvalues[0].real(), q.jacobian_eigenvalues[0].imag(), q.jacobian_eigenvalues[1].real(),
             q.jacobian_eigenvalues[1].imag()});
    }
    r.tables.push_back(std::move(e));
  }
  return r;
}

inline Result cmd_chaos(const RunConfig& c) {
  if (c.params.A == 0.0) throw UsageError("chaos requires A != 0");
  ChaosOptions opt;
  opt.transient = c.transient;
  opt.record = c.record;
  opt.bins = c.bins;
  opt.workers = resolve_workers(c.workers);
  opt.start = BlochState{c.theta, c.phi};
  opt.dt = c.dt;
  opt.realizations = c.realizations;
  opt.base_seed = c.seed;
  const auto us = linear_grid(c.range.lo, c.range.hi, c.steps);

  Result r;
  auto table = [&](const std::string& name, const std::vector<ChaosColumn>& cols, bool quantum) {
    Table t{name, {"U", "bin", "n_lo", "n_hi", "weight", "count"}, {}};
    json meta = json::array();
    for (const auto& col : cols) {
      json m{{"U", col.value}, {"error", col.error}};
      if (col.error.empty()) {
        const Histogram& h = col.histogram;
        for (int b = 0; b < h.bins(); ++b)
          t.add({col.value, static_cast<long long>(b), h.edge(b), h.edge(b + 1), h.weights[static_cast<std::size_t>(b)],
                 static_cast<long long>(h.counts[static_cast<std::size_t>(b)])});
        m["occupied_bins"] = h.occupied();
        m["modes"] = histogram_modes(h);
        if (!quantum) m["clusters"] = col.clusters;
      }
      if (quantum) m["seeds"] = col.seeds;
      meta.push_back(std::move(m));
    }
    r.tables.push_back(std::move(t));
    r.metadata[name] = std::move(meta);
  };
  if (c.models != "quantum") table("classical", chaos_diagram_classical(c.params, us, opt), false);
  if (c.models != "classical") table("quantum", chaos_diagram_quantum(c.params, us, opt), true);
  return r;
}

inline Result run_command(const RunConfig& c) {
  if (c.command == "stationary") return cmd_stationary(c);
  if (c.command == "spectrum") return cmd_spectrum(c);
  if (c.command == "sweep1d") return cmd_sweep1d(c);
  if (c.command == "sweep2d") return cmd_sweep2d(c);
  if (c.command == "meanfield") return cmd_meanfield(c);
  if (c.command == "chaos") return cmd_chaos(c);
  throw UsageError("unknown command '" + c.command + "'");
}

}  // namespace qbif::cli
