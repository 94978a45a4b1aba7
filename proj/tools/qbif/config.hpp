#pragma once

// Run configuration: per-command defaults, then the JSON config file, then
// explicit flags.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qbif/bifurcation.hpp"
#include "qbif/dimer_model.hpp"
#include "qbif/error.hpp"

namespace qbif::cli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

inline Range parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("range must look like lo:hi, got '" + s + "'");
  try {
    std::size_t used = 0;
    Range r;
    const std::string a = s.substr(0, colon);
    const std::string b = s.substr(colon + 1);
    r.lo = std::stod(a, &used);
    if (used != a.size()) throw UsageError("bad range bound '" + a + "'");
    r.hi = std::stod(b, &used);
    if (used != b.size()) throw UsageError("bad range bound '" + b + "'");
    return r;
  } catch (const std::logic_error&) {
    throw UsageError("range must look like lo:hi, got '" + s + "'");
  }
}

struct RunConfig {
  std::string command;
  DimerParams params;
  std::string axis = "U";
  Range range{0.05, 0.7};
  int steps = 60;
  std::string axis2 = "E";
  Range range2{0.0, 0.1};
  int steps2 = 20;
  std::uint64_t seed = 1;
  int realizations = 8;
  int transient = 2000;
  int record = 2000;
  int bins = 200;
  unsigned workers = 0;  // 0 = available parallelism
  std::string out = "-";
  std::string format = "csv";
  // tolerances and method knobs
  double maxima_floor = 1e-6;
  double bisect_tol = 1e-3;
  double residual_tol = 1e-10;
  int spectrum_k = 3;
  double dt = 0.0;  // 0 = command default
  double t_end = 100.0;
  double theta = kDefaultDrivenStart.theta;
  double phi = kDefaultDrivenStart.phi;
  std::string models = "both";  // chaos: classical | quantum | both
};

/// Defaults: gamma = 0.1 and N = 50 for the
/// stationary problem, the driven set J=-1, E=1, A=1.5, T=1 for chaos.
inline RunConfig defaults_for(const std::string& command) {
  RunConfig c;
  c.command = command;
  c.params = DimerParams{};
  if (command == "chaos") {
    c.params.J = -1.0;
    c.params.E = 1.0;
    c.params.A = 1.5;
    c.params.T = 1.0;
    c.params.N = 100;
    c.range = {0.0, 1.0};
    c.steps = 20;
  } else if (command == "meanfield") {
    c.params.J = -1.0;
    c.params.E = 1.0;
    c.params.A = 1.5;
    c.params.T = 1.0;
  } else if (command == "sweep2d") {
    c.range = {0.0, 1.0};
    c.steps = 40;
  }
  return c;
}

inline void set_param(DimerParams& p, const std::string& key, double v) {
  if (key == "J") p.J = v;
  else if (key == "U") p.U = v;
  else if (key == "E") p.E = v;
  else if (key == "A") p.A = v;
  else if (key == "T") p.T = v;
  else if (key == "gamma") p.gamma = v;
  else if (key == "N") {
    if (v != static_cast<double>(static_cast<int>(v))) throw UsageError("N must be an integer");
    p.N = static_cast<int>(v);
  } else {
    throw UsageError("unknown parameter '" + key + "' (expected J, U, E, A, T, gamma, N)");
  }
}

inline void apply_param_assignment(DimerParams& p, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string val = kv.substr(eq + 1);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(val, &used);
  } catch (const std::logic_error&) {
    throw UsageError("bad value for parameter '" + key + "': '" + val + "'");
  }
  if (used != val.size()) throw UsageError("bad value for parameter '" + key + "': '" + val + "'");
  set_param(p, key, v);
}

inline json params_json(const DimerParams& p) {
  return json{{"J", p.J}, {"U", p.U}, {"E", p.E}, {"A", p.A}, {"T", p.T}, {"gamma", p.gamma}, {"N", p.N}};
}

inline json to_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"params", params_json(c.params)},
              {"axis", c.axis},
              {"range", {c.range.lo, c.range.hi}},
              {"steps", c.steps},
              {"axis2", c.axis2},
              {"range2", {c.range2.lo, c.range2.hi}},
              {"steps2", c.steps2},
              {"seed", c.seed},
              {"realizations", c.realizations},
              {"transient", c.transient},
              {"record", c.record},
              {"bins", c.bins},
              {"workers", c.workers},
              {"format", c.format},
              {"maxima_floor", c.maxima_floor},
              {"bisect_tol", c.bisect_tol},
              {"residual_tol", c.residual_tol},
              {"spectrum_k", c.spectrum_k},
              {"dt", c.dt},
              {"t_end", c.t_end},
              {"theta", c.theta},
              {"phi", c.phi},
              {"models", c.models}};
}

/// Overlays the keys present in a JSON config object onto c.
inline void merge_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command" || key == "schema_version") continue;
      if (key == "params") {
        if (!v.is_object()) throw UsageError("config 'params' must be an object");
        for (const auto& [pk, pv] : v.items()) set_param(c.params, pk, pv.get<double>());
      } else if (key == "range" || key == "range2") {
        if (!v.is_array() || v.size() != 2) throw UsageError("config '" + key + "' must be [lo, hi]");
        Range& r = key == "range" ? c.range : c.range2;
        r = {v[0].get<double>(), v[1].get<double>()};
      } else if (key == "axis") c.axis = v.get<std::string>();
      else if (key == "axis2") c.axis2 = v.get<std::string>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "steps2") c.steps2 = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "realizations") c.realizations = v.get<int>();
      else if (key == "transient") c.transient = v.get<int>();
      else if (key == "record") c.record = v.get<int>();
      else if (key == "bins") c.bins = v.get<int>();
      else if (key == "workers") c.workers = v.get<unsigned>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "format") c.format = v.get<std::string>();
      else if (key == "maxima_floor") c.maxima_floor = v.get<double>();
      else if (key == "bisect_tol") c.bisect_tol = v.get<double>();
      else if (key == "residual_tol") c.residual_tol = v.get<double>();
      else if (key == "spectrum_k") c.spectrum_k = v.get<int>();
      else if (key == "dt") c.dt = v.get<double>();
      else if (key == "t_end") c.t_end = v.get<double>();
      else if (key == "theta") c.theta = v.get<double>();
      else if (key == "phi") c.phi = v.get<double>();
      else if (key == "models") c.models = v.get<std::string>();
      else throw UsageError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

inline void validate(const RunConfig& c) {
  try {
    c.params.validate();
    parse_axis(c.axis);
    if (c.command == "sweep2d") parse_axis(c.axis2);
  } catch (const InvalidParameter& e) {
    throw UsageError(e.what());
  }
  if (c.command == "sweep2d" && c.axis == c.axis2) throw UsageError("--axis and --axis2 must differ");
  if (c.steps < 0 || c.steps2 < 0) throw UsageError("steps must be >= 0");
  if (c.realizations < 1) throw UsageError("realizations must be >= 1");
  if (c.transient < 0 || c.record < 1) throw UsageError("transient must be >= 0 and record >= 1");
  if (c.bins < 1) throw UsageError("bins must be >= 1");
  if (c.format != "csv" && c.format != "json") throw UsageError("format must be csv or json");
  if (c.models != "both" && c.models != "classical" && c.models != "quantum")
    throw UsageError("models must be classical, quantum or both");
  if (c.spectrum_k < 0) throw UsageError("spectrum-k must be >= 0");
  if (!(c.maxima_floor >= 0.0) || !(c.bisect_tol > 0.0) || !(c.residual_tol > 0.0))
    throw UsageError("tolerances must be positive");
  if (c.dt < 0.0 || !(c.t_end >= 0.0)) throw UsageError("dt and t-end must be non-negative");
}

inline unsigned resolve_workers(unsigned w) {
  if (w != 0) return w;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

}  // namespace qbif::cli
