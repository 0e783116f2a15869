/// \file experiments.hpp
/// Scenario runners: reproducible end-to-end experiments built from the
/// solver and evolution modules, with JSON configuration, seeded
/// perturbations, persisted results, and a machine-readable verdict.
///
/// Every scenario reduces to a list of named checks.  A check passes when
/// value <= threshold (thresholds are strictly positive; boolean facts are
/// encoded as value 0/1 against threshold 1/2).  The verdict line
///   RESULT <scenario> PASS|FAIL <max_residual>
/// reports the largest value/threshold ratio, so PASS is equivalent to
/// max_residual <= 1 up to the rounding of the printed number.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "functionals.hpp"
#include "grid.hpp"
#include "groundstate.hpp"
#include "io.hpp"
#include "soliton.hpp"

namespace hardy_nls {

// ---------------------------------------------------------------------------
// Configuration

enum class Scenario {
  GroundState,
  Evolve,
  Stability,
  BlowupCritical,
  BlowupSupercritical,
  NegativeEnergyBlowup,
  CompareInfinity,
  VerifyIdentities,
};

inline const char* to_token(Scenario s) {
  switch (s) {
    case Scenario::GroundState: return "groundstate";
    case Scenario::Evolve: return "evolve";
    case Scenario::Stability: return "stability";
    case Scenario::BlowupCritical: return "blowup-critical";
    case Scenario::BlowupSupercritical: return "blowup-supercritical";
    case Scenario::NegativeEnergyBlowup: return "negative-energy-blowup";
    case Scenario::CompareInfinity: return "compare-infinity";
    case Scenario::VerifyIdentities: return "verify-identities";
  }
  throw std::logic_error("to_token: unknown scenario");
}

inline const std::vector<Scenario>& all_scenarios() {
  static const std::vector<Scenario> list = {
      Scenario::GroundState,         Scenario::Evolve,
      Scenario::Stability,           Scenario::BlowupCritical,
      Scenario::BlowupSupercritical, Scenario::NegativeEnergyBlowup,
      Scenario::CompareInfinity,     Scenario::VerifyIdentities};
  return list;
}

inline Scenario scenario_from_token(const std::string& token) {
  for (Scenario s : all_scenarios())
    if (token == to_token(s)) return s;
  throw std::invalid_argument("unknown scenario token: " + token);
}

struct GridSpec {
  GridKind kind = GridKind::HalfLine;
  double length = 40.0;
  int n = 8192;
};

struct DynamicsSpec {
  double T = 10.0;
  double dt = 1e-3;
  int cadence = 10;
  double blowup_factor = 10.0;
  int snapshot_every = 0;
};

struct PerturbationSpec {
  double amplitude = 0.0;
  std::uint64_t seed = 1;
};

struct RunConfig {
  Scenario scenario = Scenario::GroundState;
  Params params;
  GridSpec grid;
  SolverOptions solver;
  DynamicsSpec dynamics;
  PerturbationSpec perturbation;
  double scaling_lambda = 1.05;  ///< dilation for the supercritical data
  std::string out_dir = "out";
};

inline bool operator==(const GridSpec& a, const GridSpec& b) {
  return a.kind == b.kind && a.length == b.length && a.n == b.n;
}
inline bool operator==(const DynamicsSpec& a, const DynamicsSpec& b) {
  return a.T == b.T && a.dt == b.dt && a.cadence == b.cadence &&
         a.blowup_factor == b.blowup_factor &&
         a.snapshot_every == b.snapshot_every;
}
inline bool operator==(const PerturbationSpec& a, const PerturbationSpec& b) {
  return a.amplitude == b.amplitude && a.seed == b.seed;
}
inline bool operator==(const Params& a, const Params& b) {
  return a.p == b.p && a.c == b.c && a.omega == b.omega;
}
inline bool operator==(const SolverOptions& a, const SolverOptions& b) {
  return a.max_iters == b.max_iters && a.step_size == b.step_size &&
         a.tol_residual == b.tol_residual && a.tol_identity == b.tol_identity &&
         a.backtrack_factor == b.backtrack_factor &&
         a.record_iterates == b.record_iterates;
}
inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.scenario == b.scenario && a.params == b.params && a.grid == b.grid &&
         a.solver == b.solver && a.dynamics == b.dynamics &&
         a.perturbation == b.perturbation &&
         a.scaling_lambda == b.scaling_lambda && a.out_dir == b.out_dir;
}

namespace detail {

inline void check_keys(const nlohmann::json& obj, const char* where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw std::invalid_argument(std::string("config: ") + where +
                                " must be a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known)
      throw std::invalid_argument(std::string("config: unknown key '") +
                                  item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for '") + key +
                                "'");
  }
}

}  // namespace detail

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["scenario"] = to_token(cfg.scenario);
  doc["params"] = params_json(cfg.params);
  doc["grid"] = {
      {"kind", cfg.grid.kind == GridKind::HalfLine ? "half-line" : "full-line"},
      {"length", cfg.grid.length},
      {"n", cfg.grid.n}};
  doc["solver"] = {{"max_iters", cfg.solver.max_iters},
                   {"step_size", cfg.solver.step_size},
                   {"tol_residual", cfg.solver.tol_residual},
                   {"tol_identity", cfg.solver.tol_identity},
                   {"backtrack_factor", cfg.solver.backtrack_factor},
                   {"record_iterates", cfg.solver.record_iterates}};
  doc["dynamics"] = {{"T", cfg.dynamics.T},
                     {"dt", cfg.dynamics.dt},
                     {"cadence", cfg.dynamics.cadence},
                     {"blowup_factor", cfg.dynamics.blowup_factor},
                     {"snapshot_every", cfg.dynamics.snapshot_every}};
  doc["perturbation"] = {{"amplitude", cfg.perturbation.amplitude},
                         {"seed", cfg.perturbation.seed}};
  doc["scaling_lambda"] = cfg.scaling_lambda;
  doc["out_dir"] = cfg.out_dir;
  return doc;
}

inline std::string serialize_config(const RunConfig& cfg) {
  return json_text(config_json(cfg));
}

/// Strict parse: unknown keys are rejected, missing optional sections take
/// the documented defaults, `scenario` is mandatory.
inline RunConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: parse error: ") +
                                e.what());
  }
  detail::check_keys(doc, "top level",
                     {"schema_version", "scenario", "params", "grid", "solver",
                      "dynamics", "perturbation", "scaling_lambda", "out_dir"});
  const int version = detail::get_or<int>(doc, "schema_version", kSchemaVersion);
  if (version != kSchemaVersion)
    throw std::invalid_argument("config: unsupported schema_version " +
                                std::to_string(version));
  if (!doc.contains("scenario"))
    throw std::invalid_argument("config: missing required key 'scenario'");

  RunConfig cfg;
  cfg.scenario = scenario_from_token(doc.at("scenario").get<std::string>());
  if (doc.contains("params")) {
    const auto& j = doc.at("params");
    detail::check_keys(j, "params", {"p", "c", "omega"});
    cfg.params.p = detail::get_or<double>(j, "p", cfg.params.p);
    cfg.params.c = detail::get_or<double>(j, "c", cfg.params.c);
    cfg.params.omega = detail::get_or<double>(j, "omega", cfg.params.omega);
  }
  if (doc.contains("grid")) {
    const auto& j = doc.at("grid");
    detail::check_keys(j, "grid", {"kind", "length", "n"});
    const std::string kind =
        detail::get_or<std::string>(j, "kind", "half-line");
    if (kind == "half-line")
      cfg.grid.kind = GridKind::HalfLine;
    else if (kind == "full-line")
      cfg.grid.kind = GridKind::FullLine;
    else
      throw std::invalid_argument("config: grid.kind must be 'half-line' or "
                                  "'full-line'");
    cfg.grid.length = detail::get_or<double>(j, "length", cfg.grid.length);
    cfg.grid.n = detail::get_or<int>(j, "n", cfg.grid.n);
  }
  if (doc.contains("solver")) {
    const auto& j = doc.at("solver");
    detail::check_keys(j, "solver",
                       {"max_iters", "step_size", "tol_residual",
                        "tol_identity", "backtrack_factor", "record_iterates"});
    cfg.solver.max_iters =
        detail::get_or<int>(j, "max_iters", cfg.solver.max_iters);
    cfg.solver.step_size =
        detail::get_or<double>(j, "step_size", cfg.solver.step_size);
    cfg.solver.tol_residual =
        detail::get_or<double>(j, "tol_residual", cfg.solver.tol_residual);
    cfg.solver.tol_identity =
        detail::get_or<double>(j, "tol_identity", cfg.solver.tol_identity);
    cfg.solver.backtrack_factor = detail::get_or<double>(
        j, "backtrack_factor", cfg.solver.backtrack_factor);
    cfg.solver.record_iterates = detail::get_or<bool>(
        j, "record_iterates", cfg.solver.record_iterates);
  }
  if (doc.contains("dynamics")) {
    const auto& j = doc.at("dynamics");
    detail::check_keys(
        j, "dynamics", {"T", "dt", "cadence", "blowup_factor", "snapshot_every"});
    cfg.dynamics.T = detail::get_or<double>(j, "T", cfg.dynamics.T);
    cfg.dynamics.dt = detail::get_or<double>(j, "dt", cfg.dynamics.dt);
    cfg.dynamics.cadence =
        detail::get_or<int>(j, "cadence", cfg.dynamics.cadence);
    cfg.dynamics.blowup_factor =
        detail::get_or<double>(j, "blowup_factor", cfg.dynamics.blowup_factor);
    cfg.dynamics.snapshot_every =
        detail::get_or<int>(j, "snapshot_every", cfg.dynamics.snapshot_every);
  }
  if (doc.contains("perturbation")) {
    const auto& j = doc.at("perturbation");
    detail::check_keys(j, "perturbation", {"amplitude", "seed"});
    cfg.perturbation.amplitude =
        detail::get_or<double>(j, "amplitude", cfg.perturbation.amplitude);
    cfg.perturbation.seed =
        detail::get_or<std::uint64_t>(j, "seed", cfg.perturbation.seed);
  }
  cfg.scaling_lambda =
      detail::get_or<double>(doc, "scaling_lambda", cfg.scaling_lambda);
  cfg.out_dir = detail::get_or<std::string>(doc, "out_dir", cfg.out_dir);
  return cfg;
}

// ---------------------------------------------------------------------------
// Seeded data

namespace detail {

/// Uniform double in [0,1) from the top 53 bits, identical on every
/// implementation (std::uniform_real_distribution is not pinned down).
inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double u_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * u01(rng);
}

/// Smooth window vanishing at both domain ends, so bump sums respect the
/// Dirichlet ghost convention.
inline double end_taper(const Grid& g, double x) {
  const double ell = g.span() / 64.0;
  const double left = g.origin();
  const double right = g.origin() + g.span();
  return std::tanh((x - left) / ell) * std::tanh((right - x) / ell);
}

inline Field bump_sum(const GridPtr& grid, std::mt19937_64& rng, int bumps,
                      bool complex_amplitudes) {
  const Grid& g = *grid;
  const double lo = g.origin() + g.span() / 8.0;
  const double hi = g.origin() + 5.0 * g.span() / 8.0;
  struct Bump {
    double re, im, x0, w;
  };
  std::vector<Bump> bs;
  for (int k = 0; k < bumps; ++k) {
    Bump b;
    b.re = u_in(rng, -1.0, 1.0);
    b.im = complex_amplitudes ? u_in(rng, -1.0, 1.0) : 0.0;
    b.x0 = u_in(rng, lo, hi);
    b.w = u_in(rng, g.span() / 40.0, g.span() / 10.0);
    bs.push_back(b);
  }
  return field_from_function(grid, [&](double x) {
    complexd s = 0.0;
    for (const Bump& b : bs) {
      const double r = (x - b.x0) / b.w;
      s += complexd(b.re, b.im) * std::exp(-r * r);
    }
    return s * end_taper(g, x);
  });
}

}  // namespace detail

/// Sum of three seeded smooth bumps, tapered to honor the Dirichlet ends and
/// scaled so that ||pert||_H1 = amplitude * ||reference||_H1 exactly.
inline Field seeded_perturbation(const GridPtr& grid,
                                 const PerturbationSpec& spec,
                                 const Field& reference) {
  require(static_cast<bool>(grid), "seeded_perturbation: null grid");
  require(std::isfinite(spec.amplitude) && spec.amplitude >= 0.0,
          "seeded_perturbation: amplitude must be non-negative");
  if (spec.amplitude == 0.0)
    return field_from_function(grid, [](double) { return 0.0; });
  std::mt19937_64 rng(spec.seed);
  Field pert = detail::bump_sum(grid, rng, 3, /*complex_amplitudes=*/false);
  const double raw = h1_norm(pert);
  require(raw > 0.0, "seeded_perturbation: degenerate bump draw");
  const double scale = spec.amplitude * h1_norm(reference) / raw;
  for (auto& z : pert.v) z *= scale;
  return pert;
}

/// Random smooth complex field of unit H1 norm, for identity batteries.
inline Field random_smooth_field(const GridPtr& grid, std::mt19937_64& rng) {
  Field f = detail::bump_sum(grid, rng, 6, /*complex_amplitudes=*/true);
  const double n = h1_norm(f);
  require(n > 0.0, "random_smooth_field: degenerate draw");
  for (auto& z : f.v) z /= n;
  return f;
}

// ---------------------------------------------------------------------------
// Verdicts

struct CheckRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct ScenarioReport {
  Scenario scenario = Scenario::GroundState;
  bool pass = true;
  double max_residual = 0.0;
  std::vector<CheckRow> checks;
  std::vector<std::string> log;
  std::vector<std::string> files_written;

  void add(const std::string& name, double value, double threshold) {
    require(std::isfinite(threshold) && threshold > 0.0,
            "ScenarioReport: thresholds must be positive");
    CheckRow row{name, value, threshold, false};
    row.pass = std::isfinite(value) && value <= threshold;
    pass = pass && row.pass;
    if (std::isfinite(value))
      max_residual = std::max(max_residual, value / threshold);
    else
      max_residual = std::max(max_residual, 2.0);
    checks.push_back(std::move(row));
  }
  void add_fact(const std::string& name, bool ok) {
    add(name, ok ? 0.0 : 1.0, 0.5);
  }
  void note(std::string line) { log.push_back(std::move(line)); }

  std::string verdict_line() const {
    return std::string("RESULT ") + to_token(scenario) + ' ' +
           (pass ? "PASS" : "FAIL") + ' ' + format_double(max_residual);
  }
};

inline int exit_status(const ScenarioReport& r) { return r.pass ? 0 : 1; }

namespace detail {

inline std::string checks_csv(const ScenarioReport& rep) {
  std::string out = csv_preamble();
  out += "check,value,threshold,pass\n";
  for (const CheckRow& row : rep.checks) {
    out += row.name;
    out += ',';
    out += format_double(row.value);
    out += ',';
    out += format_double(row.threshold);
    out += ',';
    out += row.pass ? "1" : "0";
    out += '\n';
  }
  return out;
}

inline nlohmann::json report_json(const ScenarioReport& rep,
                                  const RunConfig& cfg) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["scenario"] = to_token(rep.scenario);
  doc["config"] = config_json(cfg);
  doc["pass"] = rep.pass;
  doc["max_residual"] = rep.max_residual;
  nlohmann::json rows = nlohmann::json::array();
  for (const CheckRow& row : rep.checks)
    rows.push_back({{"check", row.name},
                    {"value", row.value},
                    {"threshold", row.threshold},
                    {"pass", row.pass}});
  doc["checks"] = rows;
  doc["log"] = rep.log;
  doc["files"] = rep.files_written;
  return doc;
}

/// Emit <token>_report.json and <token>_log.txt; the verdict is the last
/// line of the log file.
inline void finalize_report(ScenarioReport& rep, const RunConfig& cfg,
                            std::map<std::string, std::string> extra_docs) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  ensure_directory(dir);
  const std::string token = to_token(rep.scenario);
  for (auto& [name, content] : extra_docs) {
    write_text_file(dir / name, content);
    rep.files_written.push_back(name);
  }
  {
    const std::string name = token + "_checks.csv";
    write_text_file(dir / name, checks_csv(rep));
    rep.files_written.push_back(name);
  }
  rep.note(rep.verdict_line());
  {
    const std::string name = token + "_log.txt";
    std::string body;
    for (const std::string& line : rep.log) {
      body += line;
      body += '\n';
    }
    write_text_file(dir / name, body);
    rep.files_written.push_back(name);
  }
  {
    const std::string name = token + "_report.json";
    write_text_file(dir / name, json_text(report_json(rep, cfg)));
    rep.files_written.push_back(name);
  }
}

inline GridPtr make_config_grid(const RunConfig& cfg) {
  return make_grid(cfg.grid.kind, cfg.grid.length, cfg.grid.n);
}

inline void require_config(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("config: " + msg);
}

/// Scenario-level compatibility checks that should read as config rejection
/// (exit code 2), not as a failed experiment.
inline void validate_scenario_config(const RunConfig& cfg) {
  validate(cfg.params);
  validate_options(cfg.solver);
  require_config(cfg.grid.n >= 16 && std::isfinite(cfg.grid.length) &&
                     cfg.grid.length > 0.0,
                 "grid spec invalid");
  require_config(!(cfg.grid.kind == GridKind::FullLine && cfg.params.c != 0.0),
                 "inverse-square term requires a half-line grid");
  require_config(std::isfinite(cfg.dynamics.T) && cfg.dynamics.T > 0.0 &&
                     std::isfinite(cfg.dynamics.dt) && cfg.dynamics.dt > 0.0,
                 "dynamics spec invalid");
  require_config(cfg.dynamics.cadence >= 1 && cfg.dynamics.snapshot_every >= 0,
                 "dynamics spec invalid");
  require_config(cfg.dynamics.blowup_factor > 1.0, "dynamics spec invalid");
  require_config(std::isfinite(cfg.perturbation.amplitude) &&
                     cfg.perturbation.amplitude >= 0.0,
                 "perturbation amplitude must be non-negative");
  require_config(std::isfinite(cfg.scaling_lambda) && cfg.scaling_lambda > 0.0,
                 "scaling_lambda must be positive");
  switch (cfg.scenario) {
    case Scenario::Stability:
      require_config(cfg.params.p < 5.0,
                     "stability scenario requires 1 < p < 5");
      break;
    case Scenario::BlowupCritical:
    case Scenario::BlowupSupercritical:
      require_config(cfg.params.p >= 5.0,
                     "blow-up scenario requires p >= 5");
      require_config(cfg.grid.kind == GridKind::HalfLine,
                     "blow-up scenario requires a half-line grid");
      break;
    case Scenario::NegativeEnergyBlowup:
      require_config(cfg.grid.kind == GridKind::HalfLine,
                     "blow-up scenario requires a half-line grid");
      break;
    case Scenario::CompareInfinity:
      require_config(cfg.params.c > 0.0,
                     "compare-infinity requires 0 < c < 1/4");
      require_config(cfg.params.p < 5.0,
                     "compare-infinity requires 1 < p < 5 (constrained "
                     "minimization is mass-subcritical)");
      require_config(cfg.grid.kind == GridKind::HalfLine,
                     "compare-infinity requires a half-line grid");
      break;
    default:
      break;
  }
}

inline EvolveOptions evolve_options(const RunConfig& cfg,
                                    const Field* reference = nullptr) {
  EvolveOptions opts;
  opts.cadence = cfg.dynamics.cadence;
  opts.blowup_factor = cfg.dynamics.blowup_factor;
  opts.snapshot_every = cfg.dynamics.snapshot_every;
  opts.orbital_reference = reference;
  return opts;
}

inline double relative_energy_drift(const EvolutionTrace& trace) {
  require(!trace.records.empty(), "relative_energy_drift: empty trace");
  const double e0 = trace.records.front().energy;
  const double scale = std::max(std::abs(e0), 1e-12);
  double drift = 0.0;
  for (const DiagnosticsRecord& r : trace.records)
    drift = std::max(drift, std::abs(r.energy - e0) / scale);
  return drift;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenarios

/// Ground-state computation: Nehari descent, the flow cross-check when the
/// exponent is mass-subcritical, the six converged-state identities, and the
/// gap against the free-problem level.
inline ScenarioReport cmd_groundstate(const RunConfig& cfg) {
  detail::validate_scenario_config(cfg);
  ScenarioReport rep;
  rep.scenario = Scenario::GroundState;
  const GridPtr grid = detail::make_config_grid(cfg);
  const Params& prm = cfg.params;

  const GroundStateResult res =
      minimize_nehari(prm, default_initial_guess(grid, prm), cfg.solver);
  rep.add_fact("solver_converged", res.converged);
  rep.note("level_m=" + format_double(res.level_m) +
           " residual=" + format_double(res.residual) +
           " iterations=" + std::to_string(res.iterations));
  for (const auto& [name, value] : res.identity_report)
    rep.add("identity_" + name, value, cfg.solver.tol_identity);

  const double m_free = infinity_level(prm.p, prm.omega);
  const double gap = m_free - res.level_m;
  rep.note("level_m_infinity=" + format_double(m_free) +
           " gap=" + format_double(gap));
  if (prm.c > 0.0)
    rep.add_fact("level_below_free_level", gap > 0.0);
  else
    rep.add("free_level_match", std::abs(gap), 2e-3);

  std::map<std::string, std::string> docs;
  docs["groundstate_profile.csv"] = profile_csv(res.profile);
  nlohmann::json result_doc = ground_state_json(res);
  result_doc["level_m_infinity"] = m_free;
  result_doc["gap_vs_free_level"] = gap;

  if (prm.p < 5.0) {
    const double mu = functional_parts(res.profile, prm).mass;
    const GroundStateResult flow =
        normalized_gradient_flow(prm, mu, res.profile, cfg.solver);
    rep.add_fact("flow_converged", flow.converged);
    const double equiv = orbital_distance(flow.profile, res.profile).dist;
    rep.add("solver_equivalence_h1", equiv, 1e-3);
    if (flow.omega_out)
      rep.note("flow_omega_out=" + format_double(*flow.omega_out));
    result_doc["flow"] = ground_state_json(flow);
    result_doc["solver_equivalence_h1"] = equiv;
  }

  docs["groundstate_result.json"] = json_text(result_doc);
  detail::finalize_report(rep, cfg, std::move(docs));
  return rep;
}

/// Conservation run: evolve the computed ground state with the configured
/// step and horizon; PASS requires completion within the mass and energy
/// drift budgets.
inline ScenarioReport cmd_evolve(const RunConfig& cfg) {
  detail::validate_scenario_config(cfg);
  ScenarioReport rep;
  rep.scenario = Scenario::Evolve;
  const GridPtr grid = detail::make_config_grid(cfg);
  const Params& prm = cfg.params;

  const GroundStateResult res =
      minimize_nehari(prm, default_initial_guess(grid, prm), cfg.solver);
  rep.add_fact("solver_converged", res.converged);

  const EvolutionTrace trace =
      evolve(res.profile, prm, cfg.dynamics.T, cfg.dynamics.dt,
             detail::evolve_options(cfg, &res.profile));
  rep.add_fact("evolution_completed", trace.status == EvolveStatus::Completed);
  rep.add("mass_drift", trace.mass_drift, 1e-10);
  rep.add("energy_drift", detail::relative_energy_drift(trace), 1e-5);
  rep.note(std::string("status=") + to_string(trace.status) +
           " records=" + std::to_string(trace.records.size()));

  std::map<std::string, std::string> docs;
  docs["evolve_trace.csv"] = trace_csv(trace);
  int index = 0;
  for (const auto& [t, u] : trace.snapshots) {
    char name[64];
    std::snprintf(name, sizeof(name), "evolve_snapshot_%04d.csv", index++);
    docs[name] = snapshot_csv(t, u);
  }
  detail::finalize_report(rep, cfg, std::move(docs));
  return rep;
}

/// Orbital stability: perturb the ground state by a seeded bump of relative
/// H1 size `amplitude` and require the orbital distance to stay within
/// 5x its initial value (absolute 1e-3 when the perturbation is zero).
inline ScenarioReport cmd_stability(const RunConfig& cfg) {
  detail::validate_scenario_config(cfg);
  ScenarioReport rep;
  rep.scenario = Scenario::Stability;
  const GridPtr grid = detail::make_config_grid(cfg);
  const Params& prm = cfg.params;
  constexpr double kStabilityFactor = 5.0;

  const GroundStateResult res =
      minimize_nehari(prm, default_initial_guess(grid, prm), cfg.solver);
  rep.add_fact("solver_converged", res.converged);

  const Field pert = seeded_perturbation(grid, cfg.perturbation, res.profile);
  Field u0 = res.profile;
  for (int j = 0; j < u0.size(); ++j)
    u0.v[static_cast<std::size_t>(j)] += pert.v[static_cast<std::size_t>(j)];

  const EvolutionTrace trace =
      evolve(u0, prm, cfg.dynamics.T, cfg.dynamics.dt,
             detail::evolve_options(cfg, &res.profile));
  rep.add_fact("evolution_completed", trace.status == EvolveStatus::Completed);

  const double d0 = trace.records.front().orbital_dist.value_or(0.0);
  double dmax = 0.0;
  for (const DiagnosticsRecord& r : trace.records)
    dmax = std::max(dmax, r.orbital_dist.value_or(0.0));
  rep.note("dist_initial=" + format_double(d0) +
           " dist_max=" + format_double(dmax));
  // A zero perturbation has dist(0) = 0, so the factor bound degenerates;
  // the pure-standing-wave run is held to an absolute budget instead.
  const double threshold =
      cfg.perturbation.amplitude > 0.0 ? kStabilityFactor * d0 : 1e-3;
  require(threshold > 0.0, "stability: degenerate initial distance");
  rep.add("orbital_excursion", dmax, threshold);

  detail::finalize_report(rep, cfg,
                          {{"stability_trace.csv", trace_csv(trace)}});
  return rep;
}

namespace detail {

inline std::string growth_csv(const BlowupReport& report) {
  std::string out = csv_preamble();
  out += "t,grad_norm_sq,growth_ratio\n";
  const double g0 = report.growth_curve.empty()
                        ? 1.0
                        : std::max(report.growth_curve.front().second, 1e-300);
  for (const auto& [t, g2] : report.growth_curve) {
    out += format_double(t);
    out += ',';
    out += format_double(g2);
    out += ',';
    out += format_double(g2 / g0);
    out += '\n';
  }
  return out;
}

inline std::string virial_bound_csv(const EvolutionTrace& trace, double e0,
                                    double flux0, double v0) {
  std::string out = csv_preamble();
  out += "t,virial_moment,quadratic_model,deviation\n";
  for (const DiagnosticsRecord& r : trace.records) {
    if (!r.virial_moment) continue;
    const double model = v0 + flux0 * r.t + 8.0 * e0 * r.t * r.t;
    out += format_double(r.t);
    out += ',';
    out += format_double(*r.virial_moment);
    out += ',';
    out += format_double(model);
    out += ',';
    out += format_double(*r.virial_moment - model);
    out += '\n';
  }
  return out;
}

inline nlohmann::json blowup_json(const EvolutionTrace& trace,
                                  const BlowupReport& report) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["detected"] = report.detected;
  if (report.t_star) doc["t_star"] = *report.t_star;
  if (trace.resolution_loss_t) doc["resolution_loss_t"] = *trace.resolution_loss_t;
  if (trace.boundary_flag_t) doc["boundary_flag_t"] = *trace.boundary_flag_t;
  doc["status"] = to_string(trace.status);
  doc["dt_halvings"] = trace.dt_halvings;
  if (report.virial_fit) {
    doc["virial_fit"] = {{"c0", (*report.virial_fit)[0]},
                         {"c1", (*report.virial_fit)[1]},
                         {"c2", (*report.virial_fit)[2]}};
  }
  if (report.virial_root) doc["virial_root"] = *report.virial_root;
  return doc;
}

}  // namespace detail

/// Blow-up scenarios.  Critical: u0 = (1+eps)*phi at p >= 5 with E(u0) < 0,
/// detection plus the fitted virial curvature against 16*E(u0) at p = 5.
/// Supercritical: u0 = rescale(phi, lambda), set membership J<0, Q<0, S<m
/// checked before evolving and its persistence along the trajectory after.
/// Negative-energy: amplitude-doubled bump data until E < 0; the quadratic
/// virial bound is asserted for p >= 5, where the moment's curvature 8Q
/// never exceeds the conserved 16E, and reported as a signed deviation
/// otherwise (below p = 5 the comparison has no sign).
inline ScenarioReport cmd_blowup(const RunConfig& cfg) {
  detail::validate_scenario_config(cfg);
  detail::require_config(cfg.scenario == Scenario::BlowupCritical ||
                             cfg.scenario == Scenario::BlowupSupercritical ||
                             cfg.scenario == Scenario::NegativeEnergyBlowup,
                         "cmd_blowup: not a blow-up scenario");
  ScenarioReport rep;
  rep.scenario = cfg.scenario;
  const GridPtr grid = detail::make_config_grid(cfg);
  const Params& prm = cfg.params;

  Field u0 = field_from_function(grid, [](double) { return 0.0; });
  bool construction_ok = true;
  double level_m = 0.0;

  if (cfg.scenario == Scenario::NegativeEnergyBlowup) {
    // Deterministic shape; the amplitude is doubled until the energy turns
    // negative (always reachable: the p+1 term outscales the quadratic one).
    const double x0 = grid->length / 5.0;
    Field bump = field_from_function(grid, [&](double x) {
      const double r = x - x0;
      return std::tanh(x) * std::exp(-0.5 * r * r);
    });
    double alpha = 1.0;
    bool negative = false;
    for (int k = 0; k < 60 && !negative; ++k) {
      Field trial = bump;
      for (auto& z : trial.v) z *= alpha;
      if (energy(trial, prm) < 0.0) {
        u0 = trial;
        negative = true;
      } else {
        alpha *= 2.0;
      }
    }
    construction_ok = negative;
    rep.note("alpha=" + format_double(alpha));
    rep.add_fact("construction_negative_energy", negative);
  } else {
    const GroundStateResult res =
        minimize_nehari(prm, default_initial_guess(grid, prm), cfg.solver);
    rep.add_fact("solver_converged", res.converged);
    construction_ok = res.converged;
    level_m = res.level_m;
    if (cfg.scenario == Scenario::BlowupCritical) {
      const double eps =
          cfg.perturbation.amplitude > 0.0 ? cfg.perturbation.amplitude : 0.01;
      u0 = res.profile;
      for (auto& z : u0.v) z *= 1.0 + eps;
      rep.note("epsilon=" + format_double(eps));
      const double e0 = energy(u0, prm);
      rep.note("energy_initial=" + format_double(e0));
      rep.add_fact("initial_energy_negative", e0 < 0.0);
      construction_ok = construction_ok && e0 < 0.0;
    } else {
      u0 = rescale(res.profile, cfg.scaling_lambda);
      const DiagnosticsRecord d = diagnostics(u0, prm, 0.0);
      rep.note("lambda=" + format_double(cfg.scaling_lambda) +
               " J=" + format_double(d.nehari) + " Q=" + format_double(d.q) +
               " S=" + format_double(d.action) +
               " m=" + format_double(level_m));
      rep.add_fact("membership_J_negative", d.nehari < 0.0);
      rep.add_fact("membership_Q_negative", d.q < 0.0);
      rep.add_fact("membership_S_below_level", d.action < level_m);
      construction_ok = construction_ok && d.nehari < 0.0 && d.q < 0.0 &&
                        d.action < level_m;
    }
  }

  if (!construction_ok) {
    // Data failed its set-membership preconditions: abort before evolving.
    rep.note("construction checks failed; evolution skipped");
    detail::finalize_report(rep, cfg, {});
    return rep;
  }

  const DiagnosticsRecord init = diagnostics(u0, prm, 0.0);
  const EvolutionTrace trace = evolve(u0, prm, cfg.dynamics.T, cfg.dynamics.dt,
                                      detail::evolve_options(cfg));
  const BlowupReport report =
      detect_blowup(trace, BlowupThresholds{cfg.dynamics.blowup_factor});
  rep.add_fact("blowup_detected",
               trace.status == EvolveStatus::BlowupDetected && report.detected);
  if (report.t_star) rep.note("t_star=" + format_double(*report.t_star));

  std::map<std::string, std::string> docs;
  const std::string token = to_token(cfg.scenario);
  docs[token + "_trace.csv"] = trace_csv(trace);
  docs[token + "_growth.csv"] = detail::growth_csv(report);
  nlohmann::json blowup_doc = detail::blowup_json(trace, report);

  if (cfg.scenario == Scenario::BlowupCritical) {
    if (prm.p == 5.0 && report.virial_fit) {
      // At the critical exponent 8Q = 16E along the flow, so the fitted
      // parabola's curvature 2*c2 is pinned by the conserved energy.
      const double curvature = 2.0 * (*report.virial_fit)[2];
      const double target = 16.0 * init.energy;
      rep.note("fitted_curvature=" + format_double(curvature) +
               " target_16E=" + format_double(target));
      rep.add("virial_curvature_match",
              std::abs(curvature - target), 0.05 * std::abs(target));
      blowup_doc["fitted_curvature"] = curvature;
      blowup_doc["target_16E"] = target;
    }
    rep.add_fact("virial_root_positive",
                 report.virial_root.has_value() && *report.virial_root > 0.0);
  } else if (cfg.scenario == Scenario::BlowupSupercritical) {
    double max_j = -std::numeric_limits<double>::infinity();
    double max_q = max_j, max_s = max_j;
    for (const DiagnosticsRecord& r : trace.records) {
      max_j = std::max(max_j, r.nehari);
      max_q = std::max(max_q, r.q);
      max_s = std::max(max_s, r.action);
    }
    rep.note("persistence max_J=" + format_double(max_j) +
             " max_Q=" + format_double(max_q) +
             " max_S=" + format_double(max_s));
    rep.add_fact("persistence_J_negative", max_j < 0.0);
    rep.add_fact("persistence_Q_negative", max_q < 0.0);
    rep.add_fact("persistence_S_below_level", max_s < level_m);
    const double eps_fitted = -max_q;
    rep.note("eps_fitted=" + format_double(eps_fitted));
    rep.add_fact("Q_uniformly_negative", eps_fitted > 0.0);
    blowup_doc["eps_fitted"] = eps_fitted;
  } else {
    const double v0 = init.virial_moment.value_or(0.0);
    const double f0 = init.virial_flux.value_or(0.0);
    const double e0 = init.energy;
    // One-sided deviation above the parabola 8*E0*t^2 + flux0*t + moment0,
    // over the resolved window only.
    double dev = 0.0;
    const double t_limit = trace.resolution_loss_t.value_or(
        std::numeric_limits<double>::infinity());
    for (const DiagnosticsRecord& r : trace.records) {
      if (!r.virial_moment || r.t > t_limit) continue;
      const double model = v0 + f0 * r.t + 8.0 * e0 * r.t * r.t;
      dev = std::max(dev, (*r.virial_moment - model) / v0);
    }
    rep.note("quadratic_bound_deviation=" + format_double(dev));
    blowup_doc["quadratic_bound_deviation"] = dev;
    if (prm.p >= 5.0)
      rep.add("quadratic_bound_excess", dev, 1e-3);
    else
      rep.note("quadratic bound not asserted for p < 5 "
               "(holds only in the critical/supercritical range)");
    docs[token + "_virial_bound.csv"] =
        detail::virial_bound_csv(trace, e0, f0, v0);
  }

  docs[token + "_blowup.json"] = json_text(blowup_doc);
  detail::finalize_report(rep, cfg, std::move(docs));
  return rep;
}

namespace detail {

struct AsymptoticsCheck {
  std::vector<double> a_values;
  std::vector<double> k_overlap, k_grad, k_lp1, hardy_scaled;
};

/// Fitted constants of the far-separation two-bump approximations at the
/// configured exponent and frequency.  Rates: (2A + 1/sqrt(w))e^{-2 sqrt(w) A}
/// for overlap and gradient, e^{-2 sqrt(w) A} for the p+1 term, and the
/// direct 1/A^2 Hardy-term bound.
inline AsymptoticsCheck appendix_asymptotics(const GridPtr& grid,
                                             const Params& prm,
                                             const std::vector<double>& As) {
  AsymptoticsCheck out;
  out.a_values = As;
  const double w = prm.omega;
  const double sw = std::sqrt(w);
  const SolitonIntegrals line = soliton_line_integrals(prm.p, w);
  for (double A : As) {
    const double rate = (2.0 * A + 1.0 / sw) * std::exp(-2.0 * sw * A);
    const double rate_lp1 = std::exp(-2.0 * sw * A);
    const Field psi = two_bump(grid, TwoBumpSpec{prm.p, w, A,
                                                 TwoBumpNormalization::Raw, 0.0});
    const FunctionalParts f = functional_parts(psi, prm);
    out.k_overlap.push_back(overlap_integral(prm.p, w, A) / rate);
    out.k_grad.push_back(std::abs(f.grad_sq - line.grad_sq) / rate);
    out.k_lp1.push_back(std::abs(f.lp1 - line.lp1) / rate_lp1);
    out.hardy_scaled.push_back(f.hardy_w * A * A / f.mass);
  }
  return out;
}

inline void band_check(ScenarioReport& rep, const std::string& name,
                       const std::vector<double>& ks) {
  const auto [lo, hi] = std::minmax_element(ks.begin(), ks.end());
  rep.add_fact(name + "_positive", *lo > 0.0);
  rep.add(name + "_band", *hi / std::max(*lo, 1e-300), 2.0);
}

}  // namespace detail

/// Half-line level versus the free problem: the action-level gap m < m_inf,
/// the constrained energy levels I < I_inf at equal mass, the two-bump trial
/// fields E(Psi_A) strictly below I_inf with an inverse-square-sized gap,
/// and the far-separation approximation constants.
inline ScenarioReport cmd_compare_infinity(const RunConfig& cfg) {
  detail::validate_scenario_config(cfg);
  ScenarioReport rep;
  rep.scenario = Scenario::CompareInfinity;
  const GridPtr grid = detail::make_config_grid(cfg);
  const Params& prm = cfg.params;

  // Action levels at the configured frequency.
  const GroundStateResult res =
      minimize_nehari(prm, default_initial_guess(grid, prm), cfg.solver);
  rep.add_fact("solver_converged", res.converged);
  const double m_free = infinity_level(prm.p, prm.omega);
  rep.note("m=" + format_double(res.level_m) +
           " m_infinity=" + format_double(m_free) +
           " gap=" + format_double(m_free - res.level_m));
  rep.add_fact("action_level_below_free", res.level_m < m_free);

  // Constrained energy levels at equal mass mu (the free soliton's mass).
  const double mu = soliton_mass(prm.p, prm.omega);
  const ConstrainedInfinityLevel free_level =
      infinity_energy_level(prm.p, mu);
  const GroundStateResult flow =
      normalized_gradient_flow(prm, mu, res.profile, cfg.solver);
  rep.add_fact("flow_converged", flow.converged);
  const double level_i = flow.level_I.value_or(
      energy(flow.profile, Params{prm.p, prm.c, prm.omega}));
  rep.note("mu=" + format_double(mu) + " I=" + format_double(level_i) +
           " I_infinity=" + format_double(free_level.level));
  rep.add_fact("energy_level_below_free", level_i < free_level.level);

  // Two-bump trials at the same mass.  The half-line Hardy term of a far
  // bump is ~ mu/A^2, so the honest gap scale is c*mu/(2 A^2); a quarter of
  // that is asserted, the nominal 2*c*mu/A^2 scale is tabulated alongside.
  std::string table = csv_preamble();
  table +=
      "A,E_psi,I_infinity,gap,required_gap,nominal_scale\n";
  const double q_lambda = free_level.omega;
  for (double A : {4.0, 6.0, 8.0}) {
    const Field psi = two_bump(
        grid, TwoBumpSpec{prm.p, q_lambda, A, TwoBumpNormalization::MassNormalized,
                          mu});
    const double e_psi = energy(psi, prm);
    const double gap = free_level.level - e_psi;
    const double required = 0.25 * prm.c * mu / (A * A);
    const double nominal = 2.0 * prm.c * mu / (A * A);
    char label[32];
    std::snprintf(label, sizeof(label), "A%.0f", A);
    rep.add_fact(std::string("trial_below_free_") + label, gap > 0.0);
    rep.add(std::string("trial_gap_scale_") + label, required,
            std::max(gap, 1e-300));
    table += format_double(A) + ',' + format_double(e_psi) + ',' +
             format_double(free_level.level) + ',' + format_double(gap) + ',' +
             format_double(required) + ',' + format_double(nominal) + '\n';
  }

  // Far-separation approximation constants.
  const detail::AsymptoticsCheck as =
      detail::appendix_asymptotics(grid, prm, {3.0, 5.0, 8.0});
  detail::band_check(rep, "overlap_constant", as.k_overlap);
  detail::band_check(rep, "grad_constant", as.k_grad);
  detail::band_check(rep, "lp1_constant", as.k_lp1);
  {
    const auto [lo, hi] =
        std::minmax_element(as.hardy_scaled.begin(), as.hardy_scaled.end());
    rep.add("hardy_bound_constant", *hi, 4.0);
    rep.add("hardy_tightness_upper", *hi, 1.75);
    rep.add_fact("hardy_tightness_lower", *lo >= 1.0 - 1e-9);
    bool decreasing = true;
    for (std::size_t k = 1; k < as.hardy_scaled.size(); ++k)
      decreasing = decreasing && as.hardy_scaled[k] < as.hardy_scaled[k - 1];
    rep.add_fact("hardy_scaled_decreasing", decreasing);
  }
  std::string asym = csv_preamble();
  asym += "A,k_overlap,k_grad,k_lp1,hardy_scaled\n";
  for (std::size_t k = 0; k < as.a_values.size(); ++k)
    asym += format_double(as.a_values[k]) + ',' +
            format_double(as.k_overlap[k]) + ',' +
            format_double(as.k_grad[k]) + ',' + format_double(as.k_lp1[k]) +
            ',' + format_double(as.hardy_scaled[k]) + '\n';

  detail::finalize_report(
      rep, cfg,
      {{"compare-infinity_table.csv", std::move(table)},
       {"compare-infinity_asymptotics.csv", std::move(asym)}});
  return rep;
}

/// Identity battery: the converged-state identities on a computed ground
/// state plus exact algebraic identities on seeded random complex fields,
/// including the critical-exponent relation Q = 2E and the finite-difference
/// check of the dilation derivative dS(v_lambda)/dlambda = Q at lambda = 1.
inline ScenarioReport cmd_verify_identities(const RunConfig& cfg) {
  detail::validate_scenario_config(cfg);
  ScenarioReport rep;
  rep.scenario = Scenario::VerifyIdentities;
  const GridPtr grid = detail::make_config_grid(cfg);
  const Params& prm = cfg.params;

  const GroundStateResult res =
      minimize_nehari(prm, default_initial_guess(grid, prm), cfg.solver);
  rep.add_fact("solver_converged", res.converged);
  for (const auto& [name, value] : res.identity_report)
    rep.add("ground_state_" + name, value, cfg.solver.tol_identity);

  std::mt19937_64 rng(cfg.perturbation.seed);
  double worst_decomp = 0.0, worst_s = 0.0, worst_r1 = 0.0, worst_ray = 0.0;
  double worst_crit = 0.0, worst_dilation = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Field v = random_smooth_field(grid, rng);
    const FunctionalParts f = functional_parts(v, prm);
    const double h = hardy_of(f, prm);
    const double scale = std::abs(h) + prm.omega * f.mass + f.lp1 + 1.0;

    // Q - 2E = ((5-p)/(2(p+1))) * lp1, exactly, at any exponent.
    const double decomp = q_of(f, prm) - 2.0 * energy_of(f, prm) -
                          (5.0 - prm.p) / (2.0 * (prm.p + 1.0)) * f.lp1;
    worst_decomp = std::max(worst_decomp, std::abs(decomp) / scale);

    const double s_err =
        action_of(f, prm) - energy_of(f, prm) - 0.5 * prm.omega * f.mass;
    worst_s = std::max(worst_s, std::abs(s_err) / scale);

    const PohozaevResiduals pr = pohozaev_residuals(v, prm);
    worst_r1 = std::max(worst_r1,
                        std::abs(pr.r1 - nehari_of(f, prm)) / scale);

    // Ray invariance: t(alpha u) * alpha = t(u); alpha = 2 scales exactly.
    Field v2 = v;
    for (auto& z : v2.v) z *= 2.0;
    const double ray =
        std::abs(2.0 * nehari_scale(v2, prm) - nehari_scale(v, prm)) /
        nehari_scale(v, prm);
    worst_ray = std::max(worst_ray, ray);

    // Critical-exponent identity Q = 2E on the same field.
    if (grid->kind == GridKind::HalfLine || prm.c == 0.0) {
      const Params crit{5.0, prm.c, prm.omega};
      const FunctionalParts f5 = functional_parts(v, crit);
      const double crit_err = q_of(f5, crit) - 2.0 * energy_of(f5, crit);
      const double crit_scale =
          std::abs(hardy_of(f5, crit)) + crit.omega * f5.mass + f5.lp1 + 1.0;
      worst_crit = std::max(worst_crit, std::abs(crit_err) / crit_scale);
    }

    // Dilation curve S(v_lambda) = l^2 H/2 + (w/2) mass - l^{(p-1)/2}
    // lp1/(p+1); its centered difference at lambda = 1 must match Q.
    const auto s_of = [&](double l) {
      return 0.5 * l * l * h + 0.5 * prm.omega * f.mass -
             std::pow(l, 0.5 * (prm.p - 1.0)) * f.lp1 / (prm.p + 1.0);
    };
    const double delta = 1e-3;
    const double fd = (s_of(1.0 + delta) - s_of(1.0 - delta)) / (2.0 * delta);
    const double q = q_of(f, prm);
    worst_dilation = std::max(
        worst_dilation, std::abs(fd - q) / std::max(std::abs(q), 1e-8 * scale));
  }
  rep.add("random_q_decomposition", worst_decomp, 1e-13);
  rep.add("random_action_split", worst_s, 1e-13);
  rep.add("random_r1_equals_nehari", worst_r1, 1e-13);
  rep.add("random_ray_invariance", worst_ray, 1e-12);
  rep.add("random_critical_q_2e", worst_crit, 1e-13);
  rep.add("random_dilation_derivative", worst_dilation, 1e-4);

  detail::finalize_report(rep, cfg, {});
  return rep;
}

/// Dispatch on the configured scenario.  Configuration problems throw
/// std::invalid_argument (the CLI maps them to its config-error exit code);
/// experiment failures come back as a FAIL verdict.
inline ScenarioReport run_scenario(const RunConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::GroundState: return cmd_groundstate(cfg);
    case Scenario::Evolve: return cmd_evolve(cfg);
    case Scenario::Stability: return cmd_stability(cfg);
    case Scenario::BlowupCritical:
    case Scenario::BlowupSupercritical:
    case Scenario::NegativeEnergyBlowup: return cmd_blowup(cfg);
    case Scenario::CompareInfinity: return cmd_compare_infinity(cfg);
    case Scenario::VerifyIdentities: return cmd_verify_identities(cfg);
  }
  throw std::logic_error("run_scenario: unknown scenario");
}

}  // namespace hardy_nls
