/// \file hardy_nls_cli.cpp
/// Command-line driver: load a JSON run configuration, execute one scenario,
/// persist its artifacts, and report the verdict.
///
/// Exit codes: 0 = all checks pass, 1 = experiment ran and failed (or an
/// internal error), 2 = configuration rejected.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hardy_nls/experiments.hpp"

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfigError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string scenario_list() {
  std::string out;
  for (hardy_nls::Scenario s : hardy_nls::all_scenarios()) {
    if (!out.empty()) out += ", ";
    out += hardy_nls::to_token(s);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Numerical laboratory for the focusing NLS with an inverse-square "
      "potential on the half-line"};
  std::string scenario_token;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  app.add_option("scenario", scenario_token,
                 "Scenario to run; one of: " + scenario_list() +
                     " (overrides the config file's scenario)")
      ->required();
  app.add_option("--config", config_path, "JSON run configuration file")
      ->required();
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Perturbation seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    hardy_nls::RunConfig cfg =
        hardy_nls::parse_config(read_file(config_path));
    cfg.scenario = hardy_nls::scenario_from_token(scenario_token);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_opt->count() > 0) cfg.perturbation.seed = seed;

    const hardy_nls::ScenarioReport report = hardy_nls::run_scenario(cfg);
    for (const std::string& line : report.log)
      std::printf("%s\n", line.c_str());
    return hardy_nls::exit_status(report);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "hardy-nls: config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hardy-nls: error: %s\n", e.what());
    return kExitFail;
  }
}
