#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthgate/rng.hpp"
#include "synthgate/sampler.hpp"
#include "synthgate/tabular.hpp"

namespace synthgate::synth {

enum class Method { two_phase, single_phase };
std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct SynthesisPlan {
  int m = 20;
  mcmc::McmcConfig phase1_cfg;
  mcmc::McmcConfig phase2_cfg;
  double single_phase_offset = 1.0;  // c added to the target before log
  double value_floor = 0.01;         // minimum positive single-phase income
  bool clamp_to_observed = false;    // release-policy experiment switch
  std::uint64_t master_seed = 1;
  int n_threads = 1;
  tabular::EncodingOptions encoding;

  void validate() const;
};

struct SyntheticRelease {
  Method method = Method::two_phase;
  std::vector<std::vector<double>> vectors;  // m vectors, each length n, row-aligned
  std::vector<int> phase1_draw_iters;        // per vector; empty for single-phase
  std::vector<int> value_draw_iters;         // linear-model draw per vector
  std::vector<int> n_syn_star;               // non-zero phase-1 outcomes per vector
  std::uint64_t master_seed = 0;
  double offset_c = 0;                        // single-phase only
  double value_floor = 0;

  std::size_t m() const { return vectors.size(); }
  std::size_t n() const { return vectors.empty() ? 0 : vectors[0].size(); }
};

// fitted machinery kept alongside the release: risk scoring reads the
// retained draws, reports echo the chains' diagnostics
struct FittedModels {
  std::optional<mcmc::PosteriorChain> phase1_chain;  // logistic; two-phase only
  mcmc::PosteriorChain value_chain;                  // linear model
  std::vector<mcmc::PosteriorDraw> phase1_draws;
  std::vector<mcmc::PosteriorDraw> value_draws;
  tabular::DesignMatrix design;  // full-n design used for fit and generation
};

struct SynthesisResult {
  SyntheticRelease release;
  FittedModels models;
};

// p_i = logit^-1(x_i' beta), Y_i ~ Bernoulli(p_i)
std::vector<std::uint8_t> synthesize_phase1(const mcmc::PosteriorDraw& draw,
                                            const tabular::DesignMatrix& design, RngStream& rng);

// rows with phase1 = 1 get exp(Normal(x_i' beta, sigma)); the rest exact 0.
// consumes RNG draws only for phase1 = 1 rows
std::vector<double> synthesize_phase2(const mcmc::PosteriorDraw& draw,
                                      const tabular::DesignMatrix& design,
                                      const std::vector<std::uint8_t>& phase1, RngStream& rng);

SynthesisResult synthesize_two_phase(const tabular::Dataset& ds, const SynthesisPlan& plan);
SynthesisResult synthesize_single_phase(const tabular::Dataset& ds, const SynthesisPlan& plan);

}  // namespace synthgate::synth
