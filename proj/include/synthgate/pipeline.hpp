#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthgate/risk.hpp"
#include "synthgate/sampler.hpp"
#include "synthgate/simulate.hpp"
#include "synthgate/synth.hpp"
#include "synthgate/utility.hpp"

namespace synthgate::pipeline {

struct RunConfig {
  // [paths]; input/schema default to the simulate outputs under out_dir
  std::string input_csv;
  std::string schema_path;
  std::string out_dir = "out";

  // [run]
  std::uint64_t master_seed = 0;
  bool seed_set = false;  // no wall-clock default; a seed must be given
  int threads = 1;
  std::string method = "both";
  bool dump_chains = false;  // chain CSVs for external diagnostics

  // [plan]
  int m = 20;
  double single_phase_offset = 1.0;
  double value_floor = 0.01;
  bool clamp_to_observed = false;

  // [mcmc.phase1] / [mcmc.phase2]
  mcmc::McmcConfig phase1;
  mcmc::McmcConfig phase2;

  // [utility]
  std::vector<double> quantiles{0.10, 0.80};
  int bootstrap_b = 1000;
  double ci_level = 0.95;
  bool regression_on_log = false;
  bool run_quantiles = true;
  bool run_regression = true;

  // [risk]
  std::vector<std::string> known_vars{"Sex", "Race", "Education"};
  double radius = 0.3;
  int neighborhood = 10;
  double bin_width = 1.0;

  // [simulate]
  sim::SimSpec sim;

  std::string resolved_input() const;
  std::string resolved_schema() const;
  std::vector<synth::Method> methods() const;

  nlohmann::json echo() const;  // fully resolved, embedded in the manifest
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_text(const RunConfig& cfg);  // round-trips through parse

struct CliOverrides {
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::string> quantiles;  // comma-separated
  std::optional<std::uint64_t> seed;
  std::optional<int> m;
  std::optional<int> threads;
  std::optional<double> radius;
};
void apply_overrides(RunConfig& cfg, const CliOverrides& o);

// empty result = valid; entries look like "section.key: problem"
std::vector<std::string> validate_config(const RunConfig& cfg, const std::string& subcommand);

int run_simulate(const RunConfig& cfg);
int run_synthesize(const RunConfig& cfg);
int run_utility(const RunConfig& cfg);
int run_risk(const RunConfig& cfg);
int run_report(const RunConfig& cfg);

// run_manifest.json content for determinism checks
nlohmann::json read_manifest(const std::string& out_dir);

}  // namespace synthgate::pipeline
