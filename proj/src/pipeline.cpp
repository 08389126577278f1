#include "synthgate/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

#include "synthgate/csv.hpp"
#include "synthgate/util.hpp"

namespace fs = std::filesystem;

namespace synthgate::pipeline {

namespace {

constexpr const char* kManifestName = "run_manifest.json";

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument(where + ": bad unsigned integer '" + s + "'");
  return v;
}

int parse_int_cfg(const std::string& s, const std::string& where) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument(where + ": bad integer '" + s + "'");
  return v;
}

double parse_double_cfg(const std::string& s, const std::string& where) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument(where + ": bad number '" + s + "'");
  return v;
}

bool parse_bool_cfg(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument(where + ": bad boolean '" + s + "'");
}

std::vector<double> parse_double_list(const std::string& s, const std::string& where) {
  std::vector<double> out;
  for (const auto& piece : split(s, ',')) {
    const std::string t = trim(piece);
    if (t.empty()) continue;
    out.push_back(parse_double_cfg(t, where));
  }
  return out;
}

std::vector<std::string> parse_name_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& piece : split(s, ',')) {
    const std::string t = trim(piece);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void apply_mcmc_key(mcmc::McmcConfig& c, const std::string& key, const std::string& value,
                    const std::string& where) {
  if (key == "iterations") c.n_iterations = parse_int_cfg(value, where);
  else if (key == "burn_in") c.burn_in = parse_int_cfg(value, where);
  else if (key == "adaptation_window") c.adaptation_window = parse_int_cfg(value, where);
  else if (key == "target_acceptance") c.target_acceptance = parse_double_cfg(value, where);
  else if (key == "chains") c.n_chains = parse_int_cfg(value, where);
  else throw std::invalid_argument(where + ": unknown key");
}

}  // namespace

std::string RunConfig::resolved_input() const {
  if (!input_csv.empty()) return input_csv;
  return (fs::path(out_dir) / "sim.csv").string();
}

std::string RunConfig::resolved_schema() const {
  if (!schema_path.empty()) return schema_path;
  return (fs::path(out_dir) / "sim.schema").string();
}

std::vector<synth::Method> RunConfig::methods() const {
  if (method == "both") return {synth::Method::two_phase, synth::Method::single_phase};
  return {synth::method_from_name(method)};
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::string section;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw);
    if (auto pos = line.find('#'); pos != std::string::npos) line = trim(line.substr(0, pos));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = section + "." + key;

    if (section == "paths") {
      if (key == "input") cfg.input_csv = value;
      else if (key == "schema") cfg.schema_path = value;
      else if (key == "out") cfg.out_dir = value;
      else throw std::invalid_argument(where + ": unknown key");
    } else if (section == "run") {
      if (key == "master_seed") {
        cfg.master_seed = parse_u64(value, where);
        cfg.seed_set = true;
      } else if (key == "threads") cfg.threads = parse_int_cfg(value, where);
      else if (key == "method") cfg.method = value;
      else if (key == "dump_chains") cfg.dump_chains = parse_bool_cfg(value, where);
      else throw std::invalid_argument(where + ": unknown key");
    } else if (section == "plan") {
      if (key == "m") cfg.m = parse_int_cfg(value, where);
      else if (key == "single_phase_offset") cfg.single_phase_offset = parse_double_cfg(value, where);
      else if (key == "value_floor") cfg.value_floor = parse_double_cfg(value, where);
      else if (key == "clamp_to_observed") cfg.clamp_to_observed = parse_bool_cfg(value, where);
      else throw std::invalid_argument(where + ": unknown key");
    } else if (section == "mcmc.phase1") {
      apply_mcmc_key(cfg.phase1, key, value, where);
    } else if (section == "mcmc.phase2") {
      apply_mcmc_key(cfg.phase2, key, value, where);
    } else if (section == "utility") {
      if (key == "quantiles") cfg.quantiles = parse_double_list(value, where);
      else if (key == "bootstrap_b") cfg.bootstrap_b = parse_int_cfg(value, where);
      else if (key == "ci_level") cfg.ci_level = parse_double_cfg(value, where);
      else if (key == "regression_on_log") cfg.regression_on_log = parse_bool_cfg(value, where);
      else if (key == "run_quantiles") cfg.run_quantiles = parse_bool_cfg(value, where);
      else if (key == "run_regression") cfg.run_regression = parse_bool_cfg(value, where);
      else throw std::invalid_argument(where + ": unknown key");
    } else if (section == "risk") {
      if (key == "known_vars") cfg.known_vars = parse_name_list(value);
      else if (key == "radius") cfg.radius = parse_double_cfg(value, where);
      else if (key == "neighborhood") cfg.neighborhood = parse_int_cfg(value, where);
      else if (key == "bin_width") cfg.bin_width = parse_double_cfg(value, where);
      else throw std::invalid_argument(where + ": unknown key");
    } else if (section == "simulate") {
      if (key == "n") cfg.sim.n = static_cast<std::size_t>(parse_int_cfg(value, where));
      else if (key == "zero_rate") cfg.sim.zero_rate = parse_double_cfg(value, where);
      else if (key == "sigma") cfg.sim.sigma = parse_double_cfg(value, where);
      else throw std::invalid_argument(where + ": unknown key");
    } else {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config_text(read_file(path)); }

std::string config_to_text(const RunConfig& c) {
  std::string t;
  t += "[paths]\n";
  if (!c.input_csv.empty()) t += "input = " + c.input_csv + "\n";
  if (!c.schema_path.empty()) t += "schema = " + c.schema_path + "\n";
  t += "out = " + c.out_dir + "\n";
  t += "\n[run]\n";
  if (c.seed_set) t += "master_seed = " + std::to_string(c.master_seed) + "\n";
  t += "threads = " + std::to_string(c.threads) + "\n";
  t += "method = " + c.method + "\n";
  t += "dump_chains = " + std::string(c.dump_chains ? "true" : "false") + "\n";
  t += "\n[plan]\n";
  t += "m = " + std::to_string(c.m) + "\n";
  t += "single_phase_offset = " + format_double(c.single_phase_offset) + "\n";
  t += "value_floor = " + format_double(c.value_floor) + "\n";
  t += "clamp_to_observed = " + std::string(c.clamp_to_observed ? "true" : "false") + "\n";
  auto mcmc_block = [](const mcmc::McmcConfig& m) {
    std::string s;
    s += "iterations = " + std::to_string(m.n_iterations) + "\n";
    s += "burn_in = " + std::to_string(m.burn_in) + "\n";
    s += "adaptation_window = " + std::to_string(m.adaptation_window) + "\n";
    s += "target_acceptance = " + format_double(m.target_acceptance) + "\n";
    s += "chains = " + std::to_string(m.n_chains) + "\n";
    return s;
  };
  t += "\n[mcmc.phase1]\n" + mcmc_block(c.phase1);
  t += "\n[mcmc.phase2]\n" + mcmc_block(c.phase2);
  t += "\n[utility]\n";
  std::string qs;
  for (std::size_t i = 0; i < c.quantiles.size(); ++i)
    qs += (i ? "," : "") + format_double(c.quantiles[i]);
  t += "quantiles = " + qs + "\n";
  t += "bootstrap_b = " + std::to_string(c.bootstrap_b) + "\n";
  t += "ci_level = " + format_double(c.ci_level) + "\n";
  t += "regression_on_log = " + std::string(c.regression_on_log ? "true" : "false") + "\n";
  t += "run_quantiles = " + std::string(c.run_quantiles ? "true" : "false") + "\n";
  t += "run_regression = " + std::string(c.run_regression ? "true" : "false") + "\n";
  t += "\n[risk]\n";
  std::string kv;
  for (std::size_t i = 0; i < c.known_vars.size(); ++i) kv += (i ? "," : "") + c.known_vars[i];
  t += "known_vars = " + kv + "\n";
  t += "radius = " + format_double(c.radius) + "\n";
  t += "neighborhood = " + std::to_string(c.neighborhood) + "\n";
  t += "bin_width = " + format_double(c.bin_width) + "\n";
  t += "\n[simulate]\n";
  t += "n = " + std::to_string(c.sim.n) + "\n";
  t += "zero_rate = " + format_double(c.sim.zero_rate) + "\n";
  t += "sigma = " + format_double(c.sim.sigma) + "\n";
  return t;
}

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
  if (o.out) cfg.out_dir = *o.out;
  if (o.method) cfg.method = *o.method;
  if (o.quantiles) cfg.quantiles = parse_double_list(*o.quantiles, "--quantiles");
  if (o.seed) {
    cfg.master_seed = *o.seed;
    cfg.seed_set = true;
  }
  if (o.m) cfg.m = *o.m;
  if (o.threads) cfg.threads = *o.threads;
  if (o.radius) cfg.radius = *o.radius;
}

// experiment identity only: everything that determines artifact bytes.
// Paths and thread count are execution details (the determinism contract
// says they cannot change any output) and live in the manifest's
// "execution" block instead.
nlohmann::json RunConfig::echo() const {
  nlohmann::json j;
  j["run"] = {{"master_seed", master_seed}, {"method", method}, {"dump_chains", dump_chains}};
  j["plan"] = {{"m", m},
               {"single_phase_offset", single_phase_offset},
               {"value_floor", value_floor},
               {"clamp_to_observed", clamp_to_observed}};
  auto mcmc_json = [](const mcmc::McmcConfig& c) {
    return nlohmann::json{{"iterations", c.n_iterations},
                          {"burn_in", c.burn_in},
                          {"adaptation_window", c.adaptation_window},
                          {"target_acceptance", c.target_acceptance},
                          {"chains", c.n_chains}};
  };
  j["mcmc"] = {{"phase1", mcmc_json(phase1)}, {"phase2", mcmc_json(phase2)}};
  j["utility"] = {{"quantiles", quantiles},
                  {"bootstrap_b", bootstrap_b},
                  {"ci_level", ci_level},
                  {"regression_on_log", regression_on_log},
                  {"run_quantiles", run_quantiles},
                  {"run_regression", run_regression}};
  j["risk"] = {{"known_vars", known_vars},
               {"radius", radius},
               {"neighborhood", neighborhood},
               {"bin_width", bin_width}};
  j["simulate"] = {{"n", sim.n}, {"zero_rate", sim.zero_rate}, {"sigma", sim.sigma}};
  return j;
}

std::vector<std::string> validate_config(const RunConfig& cfg, const std::string& subcommand) {
  std::vector<std::string> errs;
  if (!cfg.seed_set) errs.push_back("run.master_seed: required, no wall-clock default");
  if (cfg.threads < 1) errs.push_back("run.threads: must be >= 1");
  if (cfg.method != "both" && cfg.method != "two-phase" && cfg.method != "single-phase")
    errs.push_back("run.method: expected two-phase, single-phase or both");
  if (cfg.m < 1) errs.push_back("plan.m: must be >= 1");
  if (cfg.single_phase_offset <= 0) errs.push_back("plan.single_phase_offset: must be > 0");
  if (cfg.value_floor <= 0) errs.push_back("plan.value_floor: must be > 0");
  try {
    cfg.phase1.validate();
  } catch (const std::exception& e) {
    errs.push_back(std::string("mcmc.phase1: ") + e.what());
  }
  try {
    cfg.phase2.validate();
  } catch (const std::exception& e) {
    errs.push_back(std::string("mcmc.phase2: ") + e.what());
  }
  for (double q : cfg.quantiles)
    if (!(q > 0 && q < 1)) errs.push_back("utility.quantiles: values must lie in (0,1)");
  if (cfg.bootstrap_b < 100) errs.push_back("utility.bootstrap_b: must be >= 100");
  if (!(cfg.ci_level > 0 && cfg.ci_level < 1)) errs.push_back("utility.ci_level: outside (0,1)");
  if (cfg.known_vars.empty()) errs.push_back("risk.known_vars: must not be empty");
  if (!(cfg.radius > 0)) errs.push_back("risk.radius: must be > 0");
  if (cfg.neighborhood < 1) errs.push_back("risk.neighborhood: must be >= 1");
  if (!(cfg.bin_width > 0)) errs.push_back("risk.bin_width: must be > 0");
  if (subcommand == "simulate") {
    try {
      cfg.sim.validate();
    } catch (const std::exception& e) {
      errs.push_back(std::string("simulate: ") + e.what());
    }
  }
  if (subcommand == "synthesize" || subcommand == "utility" || subcommand == "risk" ||
      subcommand == "all") {
    if (!fs::exists(cfg.resolved_input()))
      errs.push_back("paths.input: file not found: " + cfg.resolved_input());
    if (!fs::exists(cfg.resolved_schema()))
      errs.push_back("paths.schema: file not found: " + cfg.resolved_schema());
  }
  return errs;
}

namespace {

void record_artifacts(const RunConfig& cfg, const std::vector<std::string>& names) {
  const fs::path out(cfg.out_dir);
  nlohmann::json manifest;
  const fs::path mpath = out / kManifestName;
  if (fs::exists(mpath)) manifest = nlohmann::json::parse(read_file(mpath.string()));
  if (!manifest.contains("artifacts")) manifest["artifacts"] = nlohmann::json::object();
  for (const auto& name : names) {
    const std::string content = read_file((out / name).string());
    manifest["artifacts"][name] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
  }
  manifest["config"] = cfg.echo();
  manifest["execution"] = {{"input", cfg.resolved_input()},
                           {"schema", cfg.resolved_schema()},
                           {"out", cfg.out_dir},
                           {"threads", cfg.threads}};
  atomic_write_file(mpath.string(), manifest.dump(2) + "\n");
}

tabular::Dataset load_cleaned(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  const auto schema = tabular::load_schema_file((out / "cleaned.schema").string());
  return tabular::load_csv_dataset((out / "cleaned.csv").string(), schema);
}

std::string synthetic_name(synth::Method method, int ell) {
  return "synthetic_" + synth::method_name(method) + "_" + std::to_string(ell) + ".csv";
}

// rebuild release + fitted models from the on-disk artifacts, so the
// utility/risk subcommands compose without refitting
synth::SynthesisResult load_synthesis(const RunConfig& cfg, const tabular::Dataset& cleaned,
                                      synth::Method method) {
  const fs::path out(cfg.out_dir);
  const auto prov = nlohmann::json::parse(
      read_file((out / ("provenance_" + synth::method_name(method) + ".json")).string()));

  synth::SynthesisResult res;
  auto& rel = res.release;
  rel.method = method;
  rel.master_seed = prov.at("master_seed").get<std::uint64_t>();
  rel.offset_c = prov.value("offset_c", 0.0);
  rel.value_floor = prov.value("value_floor", 0.0);
  rel.n_syn_star = prov.at("n_syn_star").get<std::vector<int>>();
  if (prov.contains("phase1_draw_iterations"))
    rel.phase1_draw_iters = prov.at("phase1_draw_iterations").get<std::vector<int>>();
  rel.value_draw_iters = prov.at("value_draw_iterations").get<std::vector<int>>();

  const int m = prov.at("m").get<int>();
  const int target_col = cleaned.target_index();
  const std::string target_name = cleaned.schema()[static_cast<std::size_t>(target_col)].name;
  for (int ell = 1; ell <= m; ++ell) {
    const auto csv = read_csv((out / synthetic_name(method, ell)).string());
    int col = -1;
    for (std::size_t k = 0; k < csv.header.size(); ++k)
      if (csv.header[k] == target_name) col = static_cast<int>(k);
    if (col < 0) throw std::runtime_error("synthetic csv lacks the target column");
    std::vector<double> v;
    v.reserve(csv.rows.size());
    for (const auto& row : csv.rows) {
      const auto& cell = row[static_cast<std::size_t>(col)];
      double x = 0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (ec != std::errc{} || p != cell.data() + cell.size())
        throw std::runtime_error("synthetic csv: bad target cell '" + cell + "'");
      v.push_back(x);
    }
    rel.vectors.push_back(std::move(v));
  }

  tabular::EncodingOptions enc;
  enc.standardize_continuous = prov.at("encoding").at("standardize_continuous").get<bool>();
  enc.numeric_categorical = prov.at("encoding").at("numeric_categorical").get<bool>();
  res.models.design = tabular::design_matrix(cleaned, enc);

  auto load_draws = [&](const char* key, bool with_sigma) {
    std::vector<mcmc::PosteriorDraw> draws;
    for (const auto& dj : prov.at(key)) {
      mcmc::PosteriorDraw d;
      const auto beta = dj.at("beta").get<std::vector<double>>();
      d.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                 static_cast<Eigen::Index>(beta.size()));
      if (with_sigma) {
        d.sigma = dj.at("sigma").get<double>();
        d.has_sigma = true;
      }
      d.iteration = dj.at("iteration").get<int>();
      draws.push_back(std::move(d));
    }
    return draws;
  };
  if (method == synth::Method::two_phase)
    res.models.phase1_draws = load_draws("phase1_draws", false);
  res.models.value_draws = load_draws("value_draws", true);
  return res;
}

nlohmann::json provenance_json(const RunConfig& cfg, const synth::SynthesisResult& res) {
  const auto& rel = res.release;
  nlohmann::json prov;
  prov["method"] = synth::method_name(rel.method);
  prov["master_seed"] = rel.master_seed;
  prov["m"] = rel.m();
  prov["n"] = rel.n();
  prov["offset_c"] = rel.offset_c;
  prov["value_floor"] = rel.value_floor;
  prov["n_syn_star"] = rel.n_syn_star;
  prov["value_draw_iterations"] = rel.value_draw_iters;
  if (!rel.phase1_draw_iters.empty()) prov["phase1_draw_iterations"] = rel.phase1_draw_iters;
  prov["encoding"] = {{"standardize_continuous", true}, {"numeric_categorical", false}};
  prov["config_sha256"] = sha256_hex(cfg.echo().dump());

  auto draws_json = [](const std::vector<mcmc::PosteriorDraw>& draws, bool with_sigma) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : draws) {
      nlohmann::json dj;
      dj["iteration"] = d.iteration;
      dj["beta"] = std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size());
      if (with_sigma) dj["sigma"] = d.sigma;
      arr.push_back(std::move(dj));
    }
    return arr;
  };
  if (rel.method == synth::Method::two_phase)
    prov["phase1_draws"] = draws_json(res.models.phase1_draws, false);
  prov["value_draws"] = draws_json(res.models.value_draws, true);

  auto chain_summary = [](const mcmc::PosteriorChain& c) {
    const auto diag = mcmc::diagnostics({c});
    return nlohmann::json{
        {"acceptance_rate", c.acceptance_rate},
        {"min_ess", *std::min_element(diag.ess.begin(), diag.ess.end())},
        {"max_rhat", *std::max_element(diag.rhat.begin(), diag.rhat.end())},
        {"iterations", c.n_iterations()},
        {"burn_in", c.burn_in}};
  };
  if (res.models.phase1_chain) prov["phase1_chain"] = chain_summary(*res.models.phase1_chain);
  prov["value_chain"] = chain_summary(res.models.value_chain);

  prov["design_columns"] = res.models.design.col_names;
  nlohmann::json transforms = nlohmann::json::array();
  for (const auto& t : res.models.design.transforms)
    transforms.push_back({{"variable", t.variable}, {"mean", t.mean}, {"sd", t.sd}});
  prov["design_transforms"] = std::move(transforms);
  return prov;
}

std::string density_csv(const KernelDensity& kd) {
  std::string s = "grid,density\n";
  for (std::size_t i = 0; i < kd.grid.size(); ++i)
    s += format_double(kd.grid[i]) + "," + format_double(kd.density[i]) + "\n";
  return s;
}

}  // namespace

int run_simulate(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto res = sim::simulate(cfg.sim, derive_seed(cfg.master_seed, "simulate"));
  const fs::path out(cfg.out_dir);
  atomic_write_file((out / "sim.csv").string(), tabular::dataset_to_csv(res.dataset));
  atomic_write_file((out / "sim.schema").string(), tabular::schema_to_text(res.dataset.schema()));
  atomic_write_file((out / "sim_truth.json").string(), sim::truth_json(res.truth).dump(2) + "\n");
  record_artifacts(cfg, {"sim.csv", "sim.schema", "sim_truth.json"});
  log_info("simulate: wrote " + std::to_string(res.dataset.n()) + " rows");
  return 0;
}

int run_synthesize(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);

  const auto schema = tabular::load_schema_file(cfg.resolved_schema());
  const auto raw = tabular::load_csv_dataset(cfg.resolved_input(), schema);
  tabular::CleanLog clean_log;
  const auto cleaned = tabular::clean(raw, &clean_log);

  atomic_write_file((out / "cleaned.csv").string(), tabular::dataset_to_csv(cleaned));
  atomic_write_file((out / "cleaned.schema").string(), tabular::schema_to_text(cleaned.schema()));
  nlohmann::json cl;
  cl["rows_in"] = clean_log.rows_in;
  cl["rows_out"] = clean_log.rows_out;
  cl["total_dropped"] = clean_log.total_dropped;
  cl["rules"] = nlohmann::json::array();
  for (const auto& r : clean_log.rules) {
    nlohmann::json rule{{"variable", r.variable}, {"dropped", r.dropped}};
    rule["code"] = r.code ? nlohmann::json(*r.code) : nlohmann::json("NA");
    cl["rules"].push_back(std::move(rule));
  }
  atomic_write_file((out / "cleaning_log.json").string(), cl.dump(2) + "\n");
  std::vector<std::string> artifacts{"cleaned.csv", "cleaned.schema", "cleaning_log.json"};

  synth::SynthesisPlan plan;
  plan.m = cfg.m;
  plan.phase1_cfg = cfg.phase1;
  plan.phase2_cfg = cfg.phase2;
  plan.single_phase_offset = cfg.single_phase_offset;
  plan.value_floor = cfg.value_floor;
  plan.clamp_to_observed = cfg.clamp_to_observed;
  plan.master_seed = cfg.master_seed;
  plan.n_threads = cfg.threads;

  for (const auto method : cfg.methods()) {
    log_info("synthesize: fitting " + synth::method_name(method) + " models");
    const auto res = method == synth::Method::two_phase
                         ? synth::synthesize_two_phase(cleaned, plan)
                         : synth::synthesize_single_phase(cleaned, plan);
    for (std::size_t ell = 0; ell < res.release.m(); ++ell) {
      const auto ds_ell = cleaned.with_target(res.release.vectors[ell]);
      const std::string name = synthetic_name(method, static_cast<int>(ell) + 1);
      atomic_write_file((out / name).string(), tabular::dataset_to_csv(ds_ell));
      artifacts.push_back(name);
    }
    const std::string prov_name = "provenance_" + synth::method_name(method) + ".json";
    atomic_write_file((out / prov_name).string(), provenance_json(cfg, res).dump(2) + "\n");
    artifacts.push_back(prov_name);
    if (cfg.dump_chains) {
      if (res.models.phase1_chain) {
        const std::string cname = "chain_" + synth::method_name(method) + "_phase1.csv";
        atomic_write_file((out / cname).string(), mcmc::chain_csv(*res.models.phase1_chain));
        artifacts.push_back(cname);
      }
      const std::string cname =
          "chain_" + synth::method_name(method) +
          (method == synth::Method::two_phase ? "_phase2.csv" : ".csv");
      atomic_write_file((out / cname).string(), mcmc::chain_csv(res.models.value_chain));
      artifacts.push_back(cname);
    }
  }
  record_artifacts(cfg, artifacts);
  return 0;
}

int run_utility(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  const auto cleaned = load_cleaned(cfg);

  utility::UtilityOptions opts;
  opts.quantiles = cfg.quantiles;
  opts.bootstrap_b = cfg.bootstrap_b;
  opts.ci_level = cfg.ci_level;
  opts.regression_on_log = cfg.regression_on_log;
  opts.run_quantiles = cfg.run_quantiles;
  opts.run_regression = cfg.run_regression;
  opts.n_threads = cfg.threads;
  opts.seed = derive_seed(cfg.master_seed, "utility");

  std::vector<std::string> artifacts;
  std::string violin = "source,min,q1,median,q3,max,mean\n";
  bool original_emitted = false;

  for (const auto method : cfg.methods()) {
    const auto res = load_synthesis(cfg, cleaned, method);
    log_info("utility: evaluating " + synth::method_name(method));
    const auto rep = utility::utility_report(cleaned, res.release, opts);
    const std::string name = "utility_report_" + rep.method + ".json";
    atomic_write_file((out / name).string(), utility::utility_report_json(rep).dump(2) + "\n");
    artifacts.push_back(name);

    for (const auto& d : rep.densities) {
      if (d.source == "original" && original_emitted) continue;
      if (d.source == "original") original_emitted = true;
      const std::string dname = "density_" + d.source + ".csv";
      atomic_write_file((out / dname).string(), density_csv(d.kde));
      artifacts.push_back(dname);
    }
    for (const auto& v : rep.violin) {
      if (v.source == "original" && violin.find("original,") != std::string::npos) continue;
      violin += v.source + "," + format_double(v.summary.min) + "," +
                format_double(v.summary.q1) + "," + format_double(v.summary.median) + "," +
                format_double(v.summary.q3) + "," + format_double(v.summary.max) + "," +
                format_double(v.summary.mean) + "\n";
    }
  }
  atomic_write_file((out / "violin_summary.csv").string(), violin);
  artifacts.push_back("violin_summary.csv");
  record_artifacts(cfg, artifacts);
  return 0;
}

int run_risk(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  const auto cleaned = load_cleaned(cfg);

  std::vector<synth::SynthesisResult> results;
  for (const auto method : cfg.methods())
    results.push_back(load_synthesis(cfg, cleaned, method));
  std::vector<const synth::SynthesisResult*> ptrs;
  for (const auto& r : results) ptrs.push_back(&r);

  risk::MatchConfig mc;
  mc.known_vars = cfg.known_vars;
  mc.radius = cfg.radius;
  mc.n_threads = cfg.threads;
  risk::AttributeRiskOptions ao;
  ao.neighborhood = cfg.neighborhood;
  ao.bin_width = cfg.bin_width;
  ao.seed = derive_seed(cfg.master_seed, "risk");
  ao.n_threads = cfg.threads;

  log_info("risk: matching and attribute scoring");
  const auto rep = risk::risk_report(cleaned, ptrs, mc, ao);
  atomic_write_file((out / "risk_report.json").string(),
                    risk::risk_report_json(rep).dump(2) + "\n");
  std::vector<std::string> artifacts{"risk_report.json"};

  for (const auto& mr : rep.methods) {
    const auto kd = kernel_density(mr.attribute.truth_probability, 512);
    const std::string dname = "attr_prob_density_" + mr.method + ".csv";
    atomic_write_file((out / dname).string(), density_csv(kd));
    artifacts.push_back(dname);

    std::vector<std::size_t> hist(static_cast<std::size_t>(mr.attribute.candidates), 0);
    for (int r : mr.attribute.truth_rank) hist[static_cast<std::size_t>(r - 1)] += 1;
    std::string h = "rank,count\n";
    for (std::size_t r = 0; r < hist.size(); ++r)
      h += std::to_string(r + 1) + "," + std::to_string(hist[r]) + "\n";
    const std::string hname = "attr_rank_hist_" + mr.method + ".csv";
    atomic_write_file((out / hname).string(), h);
    artifacts.push_back(hname);
  }
  record_artifacts(cfg, artifacts);
  return 0;
}

int run_report(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  nlohmann::json summary;
  summary["utility"] = nlohmann::json::object();
  for (const auto method : cfg.methods()) {
    const fs::path p = out / ("utility_report_" + synth::method_name(method) + ".json");
    if (fs::exists(p))
      summary["utility"][synth::method_name(method)] =
          nlohmann::json::parse(read_file(p.string()));
  }
  const fs::path rp = out / "risk_report.json";
  if (fs::exists(rp)) summary["risk"] = nlohmann::json::parse(read_file(rp.string()));
  if (summary["utility"].empty() && !summary.contains("risk"))
    throw std::runtime_error("report: nothing to merge; run utility and/or risk first");
  atomic_write_file((out / "summary.json").string(), summary.dump(2) + "\n");
  record_artifacts(cfg, {"summary.json"});
  return 0;
}

nlohmann::json read_manifest(const std::string& out_dir) {
  return nlohmann::json::parse(read_file((fs::path(out_dir) / kManifestName).string()));
}

}  // namespace synthgate::pipeline
