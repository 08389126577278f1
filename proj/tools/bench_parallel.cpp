// Times the OpenMP kernels against the serial reference path and verifies
// they produce identical bits.
#include <chrono>
#include <cstdio>
#include <string>

#include "synthgate/parallel.hpp"
#include "synthgate/risk.hpp"
#include "synthgate/simulate.hpp"
#include "synthgate/synth.hpp"
#include "synthgate/utility.hpp"

using namespace synthgate;

namespace {

double seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <class F>
double time_call(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds(t0, std::chrono::steady_clock::now());
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-28s %9.3fs %9.3fs %7.2fx  %s\n", name, serial, parallel,
              serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : hardware_threads();
  const std::size_t n = argc > 2 ? static_cast<std::size_t>(std::atoll(argv[2])) : 5000;
  std::printf("bench: n=%zu, %d threads vs serial reference\n\n", n, threads);

  sim::SimSpec spec;
  spec.n = n;
  const auto simulated = sim::simulate(spec, 20260808);
  const auto& ds = simulated.dataset;

  synth::SynthesisPlan plan;
  plan.m = 20;
  plan.master_seed = 99;
  plan.phase1_cfg.n_iterations = 4000;
  plan.phase1_cfg.burn_in = 1000;
  plan.phase2_cfg.n_iterations = 4000;
  plan.phase2_cfg.burn_in = 1000;

  std::printf("fitting models once (shared by both paths)...\n");
  plan.n_threads = 1;
  synth::SynthesisResult serial_res;
  const double t_synth_serial = time_call([&] { serial_res = synth::synthesize_two_phase(ds, plan); });
  plan.n_threads = threads;
  synth::SynthesisResult par_res;
  const double t_synth_par = time_call([&] { par_res = synth::synthesize_two_phase(ds, plan); });
  std::printf("\n%-28s %10s %10s %8s\n", "kernel", "serial", "omp", "speedup");
  row("synthesize (fit+generate)", t_synth_serial, t_synth_par,
      serial_res.release.vectors == par_res.release.vectors);

  const auto& release = serial_res.release;

  utility::UtilityOptions uopts;
  uopts.run_quantiles = false;
  uopts.run_regression = false;
  uopts.seed = 7;
  uopts.n_threads = 1;
  utility::UtilityReport u_serial, u_par;
  const double t_util_serial = time_call([&] { u_serial = utility::utility_report(ds, release, uopts); });
  uopts.n_threads = threads;
  const double t_util_par = time_call([&] { u_par = utility::utility_report(ds, release, uopts); });
  row("utility (U_p, U_m, U_s)", t_util_serial, t_util_par,
      u_serial.global.u_p_per == u_par.global.u_p_per &&
          u_serial.global.u_m_per == u_par.global.u_m_per);

  risk::MatchConfig mc;
  mc.n_threads = 1;
  std::vector<risk::RecordMatch> m_serial, m_par;
  const double t_match_serial =
      time_call([&] { m_serial = risk::match_records(ds, release.vectors[0], mc); });
  mc.n_threads = threads;
  const double t_match_par =
      time_call([&] { m_par = risk::match_records(ds, release.vectors[0], mc); });
  bool same = m_serial.size() == m_par.size();
  for (std::size_t i = 0; same && i < m_serial.size(); ++i)
    same = m_serial[i].c == m_par[i].c && m_serial[i].t == m_par[i].t;
  row("risk matching (1 vector)", t_match_serial, t_match_par, same);

  risk::AttributeRiskOptions ao;
  ao.seed = 11;
  ao.n_threads = 1;
  risk::AttributeRiskReport a_serial, a_par;
  const double t_attr_serial =
      time_call([&] { a_serial = risk::attribute_probabilities(ds, serial_res, ao); });
  ao.n_threads = threads;
  const double t_attr_par =
      time_call([&] { a_par = risk::attribute_probabilities(ds, serial_res, ao); });
  row("attribute scoring", t_attr_serial, t_attr_par,
      a_serial.truth_probability == a_par.truth_probability &&
          a_serial.truth_rank == a_par.truth_rank);
  return 0;
}
