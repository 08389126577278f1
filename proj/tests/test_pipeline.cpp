#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "synthgate/csv.hpp"
#include "synthgate/pipeline.hpp"
#include "synthgate/util.hpp"

using namespace synthgate;
using namespace synthgate::pipeline;
namespace fs = std::filesystem;

namespace {

const struct QuietLogs {
  QuietLogs() { setenv("SYNTHGATE_LOG", "quiet", 0); }
} quiet_logs;

const char* kConfigText = R"(
# full config exercising every section
[paths]
out = OUTDIR

[run]
master_seed = 4242
threads = 1
method = both

[plan]
m = 2
single_phase_offset = 1
value_floor = 0.01

[mcmc.phase1]
iterations = 1500
burn_in = 500

[mcmc.phase2]
iterations = 1500
burn_in = 500

[utility]
quantiles = 0.1,0.8
bootstrap_b = 150
ci_level = 0.95
run_regression = false

[risk]
known_vars = Sex,Race,Education
radius = 0.3
neighborhood = 10

[simulate]
n = 400
zero_rate = 0.06
sigma = 0.7
)";

RunConfig test_config(const std::string& out_dir) {
  std::string text = kConfigText;
  const auto pos = text.find("OUTDIR");
  text.replace(pos, 6, out_dir);
  return parse_config_text(text);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void run_all(const RunConfig& cfg) {
  REQUIRE(run_simulate(cfg) == 0);
  REQUIRE(run_synthesize(cfg) == 0);
  REQUIRE(run_utility(cfg) == 0);
  REQUIRE(run_risk(cfg) == 0);
  REQUIRE(run_report(cfg) == 0);
}

}  // namespace

TEST_CASE("config parsing covers sections, lists and booleans") {
  const auto cfg = test_config("somewhere");
  CHECK(cfg.master_seed == 4242);
  CHECK(cfg.seed_set);
  CHECK(cfg.m == 2);
  CHECK(cfg.phase1.n_iterations == 1500);
  CHECK(cfg.quantiles == std::vector<double>{0.1, 0.8});
  CHECK(cfg.run_regression == false);
  CHECK(cfg.known_vars == std::vector<std::string>{"Sex", "Race", "Education"});
  CHECK(cfg.sim.n == 400);
}

TEST_CASE("config parsing rejects unknown keys and sections") {
  CHECK_THROWS(parse_config_text("[run]\nnot_a_key = 1\n"));
  CHECK_THROWS(parse_config_text("[nonsense]\nx = 1\n"));
  CHECK_THROWS(parse_config_text("[run]\nmaster_seed\n"));
}

TEST_CASE("config text round-trips through the emitter") {
  const auto cfg = test_config("dir");
  const auto again = parse_config_text(config_to_text(cfg));
  CHECK(again.master_seed == cfg.master_seed);
  CHECK(again.m == cfg.m);
  CHECK(again.quantiles == cfg.quantiles);
  CHECK(again.known_vars == cfg.known_vars);
  CHECK(again.sim.zero_rate == cfg.sim.zero_rate);
  CHECK(again.phase1.n_iterations == cfg.phase1.n_iterations);
  CHECK(again.echo() == cfg.echo());
}

TEST_CASE("cli overrides take precedence over config keys") {
  auto cfg = test_config("dir");
  CliOverrides o;
  o.seed = 7;
  o.m = 9;
  o.method = std::string("two-phase");
  o.radius = 0.5;
  o.quantiles = std::string("0.2,0.9");
  apply_overrides(cfg, o);
  CHECK(cfg.master_seed == 7);
  CHECK(cfg.m == 9);
  CHECK(cfg.method == "two-phase");
  CHECK(cfg.radius == 0.5);
  CHECK(cfg.quantiles == std::vector<double>{0.2, 0.9});
}

TEST_CASE("validation: missing seed and missing schema path are named") {
  RunConfig cfg;
  cfg.input_csv = "/nonexistent/in.csv";
  cfg.schema_path = "/nonexistent/in.schema";
  const auto errs = validate_config(cfg, "synthesize");
  bool seed_named = false, schema_named = false;
  for (const auto& e : errs) {
    if (e.find("master_seed") != std::string::npos) seed_named = true;
    if (e.find("paths.schema") != std::string::npos) schema_named = true;
  }
  CHECK(seed_named);
  CHECK(schema_named);

  RunConfig bad;
  bad.seed_set = true;
  bad.method = "nope";
  bad.quantiles = {1.5};
  const auto errs2 = validate_config(bad, "simulate");
  CHECK(errs2.size() >= 2);
}

TEST_CASE("simulate: zero rate within 3 binomial sd of the target at n = 5000") {
  TempDir dir("synthgate_test_sim");
  RunConfig cfg;
  cfg.out_dir = dir.path.string();
  cfg.master_seed = 11;
  cfg.seed_set = true;
  cfg.sim.n = 5000;
  cfg.sim.zero_rate = 0.04;
  REQUIRE(run_simulate(cfg) == 0);

  const auto csv = read_csv((dir.path / "sim.csv").string());
  REQUIRE(csv.rows.size() == 5000);
  std::size_t zeros = 0;
  for (const auto& row : csv.rows)
    if (row[0] == "0") ++zeros;
  const double rate = static_cast<double>(zeros) / 5000.0;
  CHECK(rate >= 0.028);  // 0.04 +- 3*sqrt(0.04*0.96/5000)
  CHECK(rate <= 0.052);

  // schema + truth artifacts exist and the manifest lists them
  CHECK(fs::exists(dir.path / "sim.schema"));
  CHECK(fs::exists(dir.path / "sim_truth.json"));
  const auto manifest = read_manifest(dir.path.string());
  CHECK(manifest.at("artifacts").contains("sim.csv"));
}

TEST_CASE("simulate: fixed seed gives byte-identical csv; n = 100 minimal run works") {
  TempDir a("synthgate_sim_a"), b("synthgate_sim_b");
  RunConfig ca, cb;
  ca.out_dir = a.path.string();
  cb.out_dir = b.path.string();
  ca.master_seed = cb.master_seed = 99;
  ca.seed_set = cb.seed_set = true;
  ca.sim.n = cb.sim.n = 100;
  REQUIRE(run_simulate(ca) == 0);
  REQUIRE(run_simulate(cb) == 0);
  CHECK(read_file((a.path / "sim.csv").string()) == read_file((b.path / "sim.csv").string()));

  RunConfig small = ca;
  small.sim.n = 99;
  CHECK(!validate_config(small, "simulate").empty());
}

TEST_CASE("full pipeline produces the complete artifact set and a consistent manifest") {
  TempDir dir("synthgate_full");
  const auto cfg = test_config(dir.path.string());
  run_all(cfg);

  for (const char* name :
       {"sim.csv", "sim.schema", "sim_truth.json", "cleaned.csv", "cleaned.schema",
        "cleaning_log.json", "synthetic_two-phase_1.csv", "synthetic_two-phase_2.csv",
        "synthetic_single-phase_1.csv", "synthetic_single-phase_2.csv",
        "provenance_two-phase.json", "provenance_single-phase.json",
        "utility_report_two-phase.json", "utility_report_single-phase.json",
        "density_original.csv", "density_two-phase.csv", "density_single-phase.csv",
        "violin_summary.csv", "risk_report.json", "attr_prob_density_two-phase.csv",
        "attr_rank_hist_two-phase.csv", "summary.json", "run_manifest.json"})
    CHECK_MESSAGE(fs::exists(dir.path / name), name);

  // manifest hashes match the bytes on disk
  const auto manifest = read_manifest(dir.path.string());
  for (const auto& [name, entry] : manifest.at("artifacts").items()) {
    const auto content = read_file((dir.path / name).string());
    CHECK(entry.at("sha256").get<std::string>() == sha256_hex(content));
  }

  // summary merges without recomputing
  const auto summary = nlohmann::json::parse(read_file((dir.path / "summary.json").string()));
  CHECK(summary.contains("utility"));
  CHECK(summary.contains("risk"));
  CHECK(summary.at("utility").contains("two-phase"));
}

TEST_CASE("dump_chains emits one csv per fitted chain") {
  TempDir dir("synthgate_dump");
  auto cfg = test_config(dir.path.string());
  cfg.dump_chains = true;
  REQUIRE(run_simulate(cfg) == 0);
  REQUIRE(run_synthesize(cfg) == 0);
  CHECK(fs::exists(dir.path / "chain_two-phase_phase1.csv"));
  CHECK(fs::exists(dir.path / "chain_two-phase_phase2.csv"));
  CHECK(fs::exists(dir.path / "chain_single-phase.csv"));
  const auto head = read_file((dir.path / "chain_two-phase_phase1.csv").string()).substr(0, 200);
  CHECK(head.find("iteration,(Intercept),") == 0);
  CHECK(head.find("log_posterior,accepted") != std::string::npos);
}

TEST_CASE("rerun with identical config reproduces identical manifest bytes") {
  TempDir dir("synthgate_rerun");
  const auto cfg = test_config(dir.path.string());
  run_all(cfg);
  const auto first = read_file((dir.path / "run_manifest.json").string());
  run_all(cfg);
  const auto second = read_file((dir.path / "run_manifest.json").string());
  CHECK(first == second);
}

TEST_CASE("parallelism does not change any artifact hash") {
  TempDir a("synthgate_par1"), b("synthgate_par8");
  auto ca = test_config(a.path.string());
  ca.threads = 1;
  auto cb = test_config(b.path.string());
  cb.threads = 8;
  run_all(ca);
  run_all(cb);
  const auto ma = read_manifest(a.path.string());
  const auto mb = read_manifest(b.path.string());
  CHECK(ma.at("artifacts") == mb.at("artifacts"));
  CHECK(ma.at("config") == mb.at("config"));
}

TEST_CASE("re-running from the emitted config text reproduces the run") {
  TempDir a("synthgate_echo_a"), b("synthgate_echo_b");
  auto ca = test_config(a.path.string());
  run_all(ca);

  auto cb = parse_config_text(config_to_text(ca));
  cb.out_dir = b.path.string();
  run_all(cb);
  CHECK(read_manifest(a.path.string()).at("artifacts") ==
        read_manifest(b.path.string()).at("artifacts"));
}

#ifdef SYNTHGATE_BIN
TEST_CASE("cli binary: validate-config reports machine-readable errors and exits non-zero") {
  TempDir dir("synthgate_cli");
  const auto cfg_path = dir.path / "bad.cfg";
  atomic_write_file(cfg_path.string(), "[run]\nthreads = 1\n");  // no seed
  const std::string cmd = std::string(SYNTHGATE_BIN) + " validate-config --config " +
                          cfg_path.string() + " --json-errors > " +
                          (dir.path / "errs.json").string();
  const int rc = std::system(cmd.c_str());
  CHECK(rc != 0);
  const auto errs = nlohmann::json::parse(read_file((dir.path / "errs.json").string()));
  REQUIRE(errs.is_array());
  bool seed_named = false;
  for (const auto& e : errs)
    if (e.get<std::string>().find("master_seed") != std::string::npos) seed_named = true;
  CHECK(seed_named);
}

TEST_CASE("cli binary: simulate then synthesize happy path") {
  TempDir dir("synthgate_cli_happy");
  auto cfg = test_config(dir.path.string());
  cfg.m = 2;
  const auto cfg_path = dir.path / "run.cfg";
  atomic_write_file(cfg_path.string(), config_to_text(cfg));
  const std::string base = std::string(SYNTHGATE_BIN) + " --config " + cfg_path.string() + " ";
  CHECK(std::system((base + "simulate").c_str()) == 0);
  CHECK(std::system((base + "synthesize --method two-phase").c_str()) == 0);
  CHECK(fs::exists(dir.path / "synthetic_two-phase_1.csv"));
  CHECK(fs::exists(dir.path / "provenance_two-phase.json"));
}
#endif
