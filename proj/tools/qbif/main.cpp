#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace qbif::cli;

  CLI::App app{"Quantum and classical bifurcation diagrams of the open driven Bose dimer"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"stationary", "stationary density matrix, its diagonal, purity and leading spectrum"},
      {"sweep1d", "one-parameter stationary sweep with classical equilibria"},
      {"sweep2d", "two-parameter boundaries of the quantum and classical diagrams"},
      {"meanfield", "integrate the mean-field equations; equilibria when A = 0"},
      {"chaos", "stroboscopic histograms of the driven system, classical and quantum"},
      {"spectrum", "leading Liouvillian eigenvalues"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> param_kv;
  std::string axis, axis2, range, range2, out, format, config_path, models;
  int steps = 0, steps2 = 0, realizations = 0, transient = 0, record = 0, bins = 0, spectrum_k = 0;
  unsigned workers = 0;
  std::uint64_t seed = 0;
  double floor = 0, bisect_tol = 0, residual_tol = 0, dt = 0, t_end = 0, theta = 0, phi = 0;

  auto* o_param = app.add_option("--param", param_kv, "model parameter key=value (J, U, E, A, T, gamma, N)");
  auto* o_axis = app.add_option("--axis", axis, "sweep axis: U, E or J");
  auto* o_range = app.add_option("--range", range, "sweep range lo:hi");
  auto* o_steps = app.add_option("--steps", steps, "number of grid intervals (samples for meanfield)");
  auto* o_axis2 = app.add_option("--axis2", axis2, "second axis for sweep2d");
  auto* o_range2 = app.add_option("--range2", range2, "second range lo:hi for sweep2d");
  auto* o_steps2 = app.add_option("--steps2", steps2, "grid intervals along the second axis");
  auto* o_seed = app.add_option("--seed", seed, "base random seed");
  auto* o_real = app.add_option("--realizations", realizations, "quantum trajectories per parameter value");
  auto* o_trans = app.add_option("--transient", transient, "transient drive periods");
  auto* o_rec = app.add_option("--record", record, "recorded drive periods");
  auto* o_bins = app.add_option("--bins", bins, "histogram bins over [0, N]");
  auto* o_workers = app.add_option("--workers", workers, "worker threads (0 = available parallelism)");
  auto* o_out = app.add_option("--out", out, "output path stem, '-' for stdout");
  auto* o_format = app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* o_floor = app.add_option("--maxima-floor", floor, "ignore diagonal entries below this value");
  auto* o_btol = app.add_option("--bisect-tol", bisect_tol, "bisection tolerance in parameter units");
  auto* o_rtol = app.add_option("--residual-tol", residual_tol, "stationary-state residual tolerance");
  auto* o_k = app.add_option("--spectrum-k", spectrum_k, "leading eigenvalues to compute (0 skips)");
  auto* o_dt = app.add_option("--dt", dt, "mean-field step (default T/200)");
  auto* o_tend = app.add_option("--t-end", t_end, "mean-field integration time");
  auto* o_theta = app.add_option("--theta", theta, "initial polar angle for mean-field runs");
  auto* o_phi = app.add_option("--phi", phi, "initial azimuth for mean-field runs");
  auto* o_models = app.add_option("--models", models, "chaos: classical, quantum or both");
  auto* o_config = app.add_option("--config", config_path, "JSON config file; flags override it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  RunConfig cfg;
  try {
    cfg = defaults_for(app.get_subcommands().front()->get_name());
    if (*o_config) merge_json(cfg, read_json_file(config_path));
    for (const auto& kv : param_kv) apply_param_assignment(cfg.params, kv);
    (void)o_param;
    if (*o_axis) cfg.axis = axis;
    if (*o_range) cfg.range = parse_range(range);
    if (*o_steps) cfg.steps = steps;
    if (*o_axis2) cfg.axis2 = axis2;
    if (*o_range2) cfg.range2 = parse_range(range2);
    if (*o_steps2) cfg.steps2 = steps2;
    if (*o_seed) cfg.seed = seed;
    if (*o_real) cfg.realizations = realizations;
    if (*o_trans) cfg.transient = transient;
    if (*o_rec) cfg.record = record;
    if (*o_bins) cfg.bins = bins;
    if (*o_workers) cfg.workers = workers;
    if (*o_out) cfg.out = out;
    if (*o_format) cfg.format = format;
    if (*o_floor) cfg.maxima_floor = floor;
    if (*o_btol) cfg.bisect_tol = bisect_tol;
    if (*o_rtol) cfg.residual_tol = residual_tol;
    if (*o_k) cfg.spectrum_k = spectrum_k;
    if (*o_dt) cfg.dt = dt;
    if (*o_tend) cfg.t_end = t_end;
    if (*o_theta) cfg.theta = theta;
    if (*o_phi) cfg.phi = phi;
    if (*o_models) cfg.models = models;
    validate(cfg);
  } catch (const UsageError& e) {
    std::cerr << "qbif: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const Result r = run_command(cfg);
    for (const auto& path : emit(cfg, r.tables, r.metadata)) std::cerr << "wrote " << path << "\n";
  } catch (const UsageError& e) {
    std::cerr << "qbif: " << e.what() << "\n";
    return kExitUsage;
  } catch (const qbif::InvalidParameter& e) {
    std::cerr << "qbif: " << e.what() << "\n";
    return kExitUsage;
  } catch (const qbif::Error& e) {
    std::cerr << "qbif: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "qbif: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
