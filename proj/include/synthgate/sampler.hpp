#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace synthgate::mcmc {

struct McmcConfig {
  int n_iterations = 20000;
  int burn_in = 5000;
  int adaptation_window = 50;       // proposal Cholesky refresh cadence
  double target_acceptance = 0.234; // multivariate RWM optimum
  std::uint64_t seed = 1;
  int n_chains = 1;

  void validate() const;
};

struct LogisticModelSpec {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;   // 0/1
  Eigen::VectorXd prior_mean; // empty -> zeros
  Eigen::VectorXd prior_sd;   // empty -> ones
};

struct LinearModelSpec {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  Eigen::VectorXd prior_mean;
  Eigen::VectorXd prior_sd;
  double precision_shape = 1.0; // Gamma prior on 1/sigma^2
  double precision_rate = 1.0;
};

struct PosteriorChain {
  // one row per iteration; linear chains append sigma as the last column
  Eigen::MatrixXd draws;
  Eigen::VectorXd log_posterior;
  std::vector<std::uint8_t> accepted;  // per iteration; all 1 for Gibbs
  std::vector<double> scale_trace;  // RWM proposal log-scale; constant past burn_in
  double acceptance_rate = 1.0;     // post burn-in
  int burn_in = 0;
  bool has_sigma = false;
  std::vector<std::string> param_names;

  int n_iterations() const { return static_cast<int>(draws.rows()); }
  int n_post() const { return n_iterations() - burn_in; }
  int n_params() const { return static_cast<int>(draws.cols()); }
};

// chain dump for external diagnostics: iteration, each parameter,
// log_posterior, accepted
std::string chain_csv(const PosteriorChain& chain);

// Adaptive random-walk Metropolis targeting the Bernoulli-logit posterior
// with independent Normal priors. Proposal covariance and scale adapt during
// burn-in only and are frozen afterwards. design with 0 rows samples the
// prior (test-only mode).
PosteriorChain fit_logistic(const LogisticModelSpec& spec, const McmcConfig& cfg);

// Blocked Gibbs for the conjugate Normal-prior linear model with a Gamma
// prior on the precision: beta | sigma is multivariate normal, 1/sigma^2 |
// beta is Gamma(shape + n/2, rate + SSR/2).
PosteriorChain fit_linear(const LinearModelSpec& spec, const McmcConfig& cfg);

// n_chains chains with seeds derived from (cfg.seed, chain index); may run
// concurrently, results identical to sequential.
std::vector<PosteriorChain> fit_logistic_chains(const LogisticModelSpec& spec,
                                                const McmcConfig& cfg, int n_threads = 1);
std::vector<PosteriorChain> fit_linear_chains(const LinearModelSpec& spec,
                                              const McmcConfig& cfg, int n_threads = 1);

struct ChainDiagnostics {
  std::vector<std::string> param_names;
  std::vector<double> ess;   // summed across chains
  std::vector<double> rhat;  // across chains when >= 2, split halves otherwise
  double acceptance_rate = 1.0;
  bool degenerate = false;  // some parameter chain was constant
};

ChainDiagnostics diagnostics(const std::vector<PosteriorChain>& chains);

// Geyer initial-positive-sequence ESS for a single scalar chain
double effective_sample_size(const std::vector<double>& x);

struct PosteriorDraw {
  Eigen::VectorXd beta;
  double sigma = 0;
  bool has_sigma = false;
  int iteration = -1;  // 1-based iteration number
};

// iterations burn_in + gap, burn_in + 2*gap, ..., burn_in + m*gap (1-based,
// so burn_in + m*gap == chain length selects the final draw)
std::vector<PosteriorDraw> select_draws(const PosteriorChain& chain, int m, int gap);
int default_gap(const McmcConfig& cfg, int m);

// stable log Bernoulli-logit likelihood term: y*eta - log(1+exp(eta))
double logistic_log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y);

}  // namespace synthgate::mcmc
