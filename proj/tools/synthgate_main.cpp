#include <CLI11.hpp>
#include <iostream>

#include "synthgate/pipeline.hpp"
#include "synthgate/util.hpp"

using synthgate::pipeline::CliOverrides;
using synthgate::pipeline::RunConfig;

namespace {

int report_errors(const std::vector<std::string>& errs, bool json_errors) {
  if (json_errors) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : errs) j.push_back(e);
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& e : errs) std::cerr << "config error: " << e << "\n";
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partially synthetic microdata: two-phase synthesis, utility and risk audits"};
  app.require_subcommand(1);

  std::string config_path;
  bool json_errors = false;
  CliOverrides o;
  std::string out, method, quantiles;
  std::uint64_t seed = 0;
  int m = 0, threads = 0;
  double radius = 0;

  app.add_option("--config", config_path, "config file (key = value sections)");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "master seed (all randomness derives from it)");
  app.add_option("--method", method, "two-phase, single-phase or both");
  app.add_option("--m", m, "number of synthetic datasets");
  app.add_option("--radius", radius, "matching radius r");
  app.add_option("--quantiles", quantiles, "comma-separated quantile levels");
  app.add_option("--threads", threads, "worker threads (1 = serial reference path)");
  app.add_flag("--json-errors", json_errors, "emit validation errors as JSON on stdout");

  auto* cmd_simulate = app.add_subcommand("simulate", "generate NHIS-like validation data");
  auto* cmd_synthesize = app.add_subcommand("synthesize", "clean input and generate releases");
  auto* cmd_utility = app.add_subcommand("utility", "global + analysis-specific utility report");
  auto* cmd_risk = app.add_subcommand("risk", "identification and attribute risk report");
  auto* cmd_report = app.add_subcommand("report", "merge utility and risk into summary.json");
  auto* cmd_validate = app.add_subcommand("validate-config", "check the config and exit");
  for (auto* sc : {cmd_simulate, cmd_synthesize, cmd_utility, cmd_risk, cmd_report, cmd_validate})
    sc->fallthrough();  // global flags may follow the subcommand name

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = synthgate::pipeline::load_config(config_path);

    if (app.count("--out")) o.out = out;
    if (app.count("--method")) o.method = method;
    if (app.count("--quantiles")) o.quantiles = quantiles;
    if (app.count("--seed")) o.seed = seed;
    if (app.count("--m")) o.m = m;
    if (app.count("--threads")) o.threads = threads;
    if (app.count("--radius")) o.radius = radius;
    synthgate::pipeline::apply_overrides(cfg, o);

    std::string sub = "validate";
    if (cmd_simulate->parsed()) sub = "simulate";
    else if (cmd_synthesize->parsed()) sub = "synthesize";
    else if (cmd_utility->parsed()) sub = "utility";
    else if (cmd_risk->parsed()) sub = "risk";
    else if (cmd_report->parsed()) sub = "report";

    const auto errs = synthgate::pipeline::validate_config(cfg, sub);
    if (!errs.empty()) return report_errors(errs, json_errors);

    if (cmd_validate->parsed()) {
      if (json_errors) std::cout << "[]\n";
      else std::cerr << "config ok\n";
      return 0;
    }
    if (cmd_simulate->parsed()) return synthgate::pipeline::run_simulate(cfg);
    if (cmd_synthesize->parsed()) return synthgate::pipeline::run_synthesize(cfg);
    if (cmd_utility->parsed()) return synthgate::pipeline::run_utility(cfg);
    if (cmd_risk->parsed()) return synthgate::pipeline::run_risk(cfg);
    if (cmd_report->parsed()) return synthgate::pipeline::run_report(cfg);
    return 2;
  } catch (const std::exception& e) {
    if (json_errors) {
      nlohmann::json j = nlohmann::json::array();
      j.push_back(std::string("error: ") + e.what());
      std::cout << j.dump(2) << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
  }
}
