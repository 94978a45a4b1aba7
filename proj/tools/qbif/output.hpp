#pragma once

// Tables and metadata writers. Numbers are printed with %.17g so identical
// runs produce identical bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "config.hpp"

namespace qbif::cli {

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

inline json json_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(nullptr);
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

inline void write_csv(std::ostream& os, const Table& t, const json& config) {
  os << "# schema_version=" << kSchemaVersion << "\n";
  os << "# table=" << t.name << "\n";
  os << "# config=" << config.dump() << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << "\n";
  }
}

inline json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(json_cell(c));
    rows.push_back(std::move(r));
  }
  return json{{"columns", t.columns}, {"rows", std::move(rows)}};
}

inline void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << content;
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

/// Writes the tables and metadata for one run.
///
/// csv:  <stem>.<table>.csv per table plus the sidecar <stem>.json
/// json: everything in <stem>.json
/// With out = "-" the output goes to stdout.
inline std::vector<std::string> emit(const RunConfig& cfg, const std::vector<Table>& tables, const json& metadata) {
  const json config = to_json(cfg);
  json sidecar{{"schema_version", kSchemaVersion}, {"config", config}, {"metadata", metadata}};

  std::string stem = cfg.out;
  for (const char* ext : {".json", ".csv"}) {
    const std::string e(ext);
    if (stem.size() > e.size() && stem.compare(stem.size() - e.size(), e.size(), e) == 0)
      stem.resize(stem.size() - e.size());
  }

  std::vector<std::string> written;
  if (cfg.format == "json") {
    json tj = json::object();
    for (const auto& t : tables) tj[t.name] = table_json(t);
    sidecar["tables"] = std::move(tj);
    const std::string text = sidecar.dump(2) + "\n";
    if (stem == "-") {
      std::cout << text;
    } else {
      write_file(stem + ".json", text);
      written.push_back(stem + ".json");
    }
    return written;
  }

  json files = json::array();
  for (const auto& t : tables) {
    std::ostringstream os;
    write_csv(os, t, config);
    if (stem == "-") {
      std::cout << os.str();
    } else {
      const std::string path = stem + "." + t.name + ".csv";
      write_file(path, os.str());
      written.push_back(path);
      files.push_back(path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1));
    }
  }
  if (stem == "-") {
    std::cout << "# metadata=" << sidecar.dump() << "\n";
  } else {
    sidecar["tables"] = std::move(files);
    write_file(stem + ".json", sidecar.dump(2) + "\n");
    written.push_back(stem + ".json");
  }
  return written;
}

}  // namespace qbif::cli
