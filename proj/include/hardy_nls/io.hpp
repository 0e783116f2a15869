/// \file io.hpp
/// Result persistence shared by the scenario runners and the CLI: CSV series
/// and JSON documents, both stamped with a schema version so downstream
/// tooling can detect format drift.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "dynamics.hpp"
#include "functionals.hpp"
#include "grid.hpp"
#include "groundstate.hpp"

namespace hardy_nls {

inline constexpr int kSchemaVersion = 1;

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::invalid_argument("output directory not writable: " +
                                dir.string());
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string csv_preamble() {
  return "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
}

/// Diagnostics series of an evolution run, one row per record.
inline std::string trace_csv(const EvolutionTrace& trace) {
  std::string out = csv_preamble();
  out += diagnostics_csv_header();
  out += '\n';
  for (const DiagnosticsRecord& r : trace.records) {
    out += diagnostics_csv_row(r);
    out += '\n';
  }
  return out;
}

/// Complex field samples on the interior nodes.
inline std::string profile_csv(const Field& u) {
  check_field(u, "profile_csv");
  const Grid& g = *u.grid;
  std::string out = csv_preamble();
  out += "x,re_u,im_u\n";
  for (int j = 0; j < g.interior(); ++j) {
    const complexd z = u.v[static_cast<std::size_t>(j)];
    out += format_double(g.x(j));
    out += ',';
    out += format_double(z.real());
    out += ',';
    out += format_double(z.imag());
    out += '\n';
  }
  return out;
}

/// Profile plus the sample time, for evolution snapshots.
inline std::string snapshot_csv(double t, const Field& u) {
  std::string out = csv_preamble();
  out += "# t=" + format_double(t) + "\n";
  // Drop profile_csv's own preamble so the version stamp appears once.
  const std::string body = profile_csv(u);
  out += body.substr(csv_preamble().size());
  return out;
}

inline nlohmann::json params_json(const Params& prm) {
  return {{"p", prm.p}, {"c", prm.c}, {"omega", prm.omega}};
}

inline nlohmann::json grid_json(const Grid& g) {
  return {{"kind", g.kind == GridKind::HalfLine ? "half-line" : "full-line"},
          {"length", g.length},
          {"n", g.n_cells}};
}

inline nlohmann::json ground_state_json(const GroundStateResult& r) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["params"] = params_json(r.params);
  if (r.profile.grid) doc["grid"] = grid_json(*r.profile.grid);
  doc["level_m"] = r.level_m;
  if (r.level_I) doc["level_I"] = *r.level_I;
  if (r.mu > 0.0) doc["mu"] = r.mu;
  doc["residual"] = r.residual;
  doc["iterations"] = r.iterations;
  doc["converged"] = r.converged;
  if (r.omega_out) doc["omega_out"] = *r.omega_out;
  if (r.cross_check_h1) doc["cross_check_h1"] = *r.cross_check_h1;
  doc["identity_report"] = r.identity_report;
  return doc;
}

/// Canonical serialized form: two-space indent, sorted keys (nlohmann
/// ordered by default for std::map), trailing newline.
inline std::string json_text(const nlohmann::json& doc) {
  return doc.dump(2) + "\n";
}

}  // namespace hardy_nls
