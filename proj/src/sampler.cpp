#include "synthgate/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "synthgate/parallel.hpp"
#include "synthgate/rng.hpp"
#include "synthgate/stats.hpp"

namespace synthgate::mcmc {

void McmcConfig::validate() const {
  if (n_iterations < 1) throw std::invalid_argument("mcmc: n_iterations < 1");
  if (burn_in < 0 || burn_in >= n_iterations)
    throw std::invalid_argument("mcmc: burn_in must be in [0, n_iterations)");
  if (!(target_acceptance > 0 && target_acceptance < 1))
    throw std::invalid_argument("mcmc: target_acceptance outside (0,1)");
  if (adaptation_window < 1) throw std::invalid_argument("mcmc: adaptation_window < 1");
  if (n_chains < 1) throw std::invalid_argument("mcmc: n_chains < 1");
}

namespace {

void check_full_rank(const Eigen::MatrixXd& X, const char* who) {
  if (X.rows() == 0) return;  // prior-sampling mode
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw std::invalid_argument(std::string(who) + ": design is rank deficient (rank " +
                                std::to_string(qr.rank()) + " of " + std::to_string(X.cols()) +
                                " columns)");
}

Eigen::VectorXd resolve(const Eigen::VectorXd& v, Eigen::Index d, double fill) {
  if (v.size() == 0) return Eigen::VectorXd::Constant(d, fill);
  if (v.size() != d) throw std::invalid_argument("mcmc: prior vector length mismatch");
  return v;
}

double normal_log_prior(const Eigen::VectorXd& beta, const Eigen::VectorXd& mean,
                        const Eigen::VectorXd& sd) {
  double lp = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double z = (beta[j] - mean[j]) / sd[j];
    lp -= 0.5 * z * z + std::log(sd[j]);
  }
  return lp;
}

}  // namespace

double logistic_log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

PosteriorChain fit_logistic(const LogisticModelSpec& spec, const McmcConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = spec.design.cols();
  const Eigen::Index n = spec.design.rows();
  if (d < 1) throw std::invalid_argument("fit_logistic: empty design");
  if (spec.response.size() != n) throw std::invalid_argument("fit_logistic: response length mismatch");
  check_full_rank(spec.design, "fit_logistic");
  const Eigen::VectorXd prior_mean = resolve(spec.prior_mean, d, 0.0);
  const Eigen::VectorXd prior_sd = resolve(spec.prior_sd, d, 1.0);
  if ((prior_sd.array() <= 0).any()) throw std::invalid_argument("fit_logistic: prior_sd <= 0");

  RngStream rng(cfg.seed, "logistic-rwm");

  auto log_post = [&](const Eigen::VectorXd& beta) {
    double lp = normal_log_prior(beta, prior_mean, prior_sd);
    if (n > 0) lp += logistic_log_likelihood(spec.design * beta, spec.response);
    return lp;
  };

  Eigen::VectorXd beta = prior_mean;
  double lp = log_post(beta);
  if (!std::isfinite(lp))
    throw std::invalid_argument("fit_logistic: non-finite log-posterior at initialization");

  PosteriorChain chain;
  chain.draws.resize(cfg.n_iterations, d);
  chain.log_posterior.resize(cfg.n_iterations);
  chain.accepted.resize(static_cast<std::size_t>(cfg.n_iterations));
  chain.scale_trace.resize(cfg.n_iterations);
  chain.burn_in = cfg.burn_in;
  chain.param_names.resize(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j)
    chain.param_names[static_cast<std::size_t>(j)] = "beta" + std::to_string(j);

  // adaptive proposal state: empirical moments feed the proposal covariance
  // during burn-in, Robbins-Monro steers the global scale toward the target
  // acceptance; both freeze at burn_in
  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  Eigen::VectorXd run_mean = beta;
  Eigen::MatrixXd run_cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(d, d) * 0.1;
  long accepted_post = 0;

  Eigen::VectorXd z(d), proposal(d);
  for (int t = 0; t < cfg.n_iterations; ++t) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    proposal = beta + std::exp(log_scale) * (chol * z);
    const double lp_prop = log_post(proposal);
    const double log_alpha = lp_prop - lp;
    const bool accept = std::log(rng.uniform01()) < log_alpha;
    if (accept) {
      beta = proposal;
      lp = lp_prop;
    }
    chain.draws.row(t) = beta;
    chain.log_posterior[t] = lp;
    chain.accepted[static_cast<std::size_t>(t)] = accept ? 1 : 0;
    chain.scale_trace[static_cast<std::size_t>(t)] = log_scale;
    if (t >= cfg.burn_in && accept) ++accepted_post;

    if (t < cfg.burn_in) {
      const double alpha = std::min(1.0, std::exp(log_alpha));
      const double eta = std::pow(static_cast<double>(t + 1), -0.6);
      log_scale += eta * (alpha - cfg.target_acceptance);

      // Welford update of mean/covariance over visited states
      const double w = 1.0 / static_cast<double>(t + 2);
      Eigen::VectorXd delta = beta - run_mean;
      run_mean += w * delta;
      run_cov = (1.0 - w) * (run_cov + w * delta * delta.transpose());

      if ((t + 1) % cfg.adaptation_window == 0 && t + 1 >= 2 * d) {
        Eigen::MatrixXd reg = run_cov + 1e-9 * Eigen::MatrixXd::Identity(d, d);
        Eigen::LLT<Eigen::MatrixXd> llt(reg);
        if (llt.info() == Eigen::Success) chol = llt.matrixL();
      }
    }
  }
  const int n_post = cfg.n_iterations - cfg.burn_in;
  chain.acceptance_rate = n_post > 0 ? static_cast<double>(accepted_post) / n_post : 0.0;
  return chain;
}

PosteriorChain fit_linear(const LinearModelSpec& spec, const McmcConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = spec.design.cols();
  const Eigen::Index n = spec.design.rows();
  if (d < 1) throw std::invalid_argument("fit_linear: empty design");
  if (n < 2) throw std::invalid_argument("fit_linear: fewer than 2 rows");
  if (spec.response.size() != n) throw std::invalid_argument("fit_linear: response length mismatch");
  if (!spec.response.allFinite()) throw std::invalid_argument("fit_linear: non-finite response");
  if (spec.precision_shape <= 0 || spec.precision_rate <= 0)
    throw std::invalid_argument("fit_linear: Gamma prior parameters must be positive");
  check_full_rank(spec.design, "fit_linear");
  const Eigen::VectorXd prior_mean = resolve(spec.prior_mean, d, 0.0);
  const Eigen::VectorXd prior_sd = resolve(spec.prior_sd, d, 1.0);
  if ((prior_sd.array() <= 0).any()) throw std::invalid_argument("fit_linear: prior_sd <= 0");

  RngStream rng(cfg.seed, "linear-gibbs");

  const Eigen::MatrixXd xtx = spec.design.transpose() * spec.design;
  const Eigen::VectorXd xty = spec.design.transpose() * spec.response;
  const double yty = spec.response.squaredNorm();
  const Eigen::VectorXd prior_prec = prior_sd.array().square().inverse();
  const Eigen::VectorXd prior_prec_mean = prior_prec.array() * prior_mean.array();

  // init: beta at prior mean, sigma at the sample sd of the response
  Eigen::VectorXd beta = prior_mean;
  double sd0 = std::sqrt((spec.response.array() - spec.response.mean()).square().sum() /
                         static_cast<double>(n - 1));
  double sigma = std::max(sd0, 1e-8);

  PosteriorChain chain;
  chain.draws.resize(cfg.n_iterations, d + 1);
  chain.log_posterior.resize(cfg.n_iterations);
  chain.accepted.assign(static_cast<std::size_t>(cfg.n_iterations), 1);  // Gibbs always moves
  chain.burn_in = cfg.burn_in;
  chain.has_sigma = true;
  chain.param_names.resize(static_cast<std::size_t>(d + 1));
  for (Eigen::Index j = 0; j < d; ++j)
    chain.param_names[static_cast<std::size_t>(j)] = "beta" + std::to_string(j);
  chain.param_names[static_cast<std::size_t>(d)] = "sigma";

  Eigen::VectorXd z(d);
  for (int t = 0; t < cfg.n_iterations; ++t) {
    // (a) beta | sigma^2: conjugate multivariate normal
    const double tau = 1.0 / (sigma * sigma);
    Eigen::MatrixXd prec = tau * xtx;
    prec.diagonal() += prior_prec;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("fit_linear: conditional precision not positive definite");
    const Eigen::VectorXd rhs = tau * xty + prior_prec_mean;
    const Eigen::VectorXd mean = llt.solve(rhs);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    // beta = mean + L^{-T} z has covariance prec^{-1}
    beta = mean + llt.matrixU().solve(z);

    // (b) 1/sigma^2 | beta: Gamma(shape + n/2, rate + SSR/2)
    double ssr = yty - 2.0 * beta.dot(xty) + beta.dot(xtx * beta);
    if (ssr < 0) ssr = 0;
    const double tau_draw = rng.gamma(spec.precision_shape + 0.5 * static_cast<double>(n),
                                      spec.precision_rate + 0.5 * ssr);
    sigma = 1.0 / std::sqrt(tau_draw);

    chain.draws(t, Eigen::seq(0, d - 1)) = beta.transpose();
    chain.draws(t, d) = sigma;
    const double tau2 = 1.0 / (sigma * sigma);
    chain.log_posterior[t] =
        -static_cast<double>(n) * std::log(sigma) - 0.5 * tau2 * ssr +
        normal_log_prior(beta, prior_mean, prior_sd) +
        (spec.precision_shape - 1.0) * std::log(tau2) - spec.precision_rate * tau2;
  }
  chain.acceptance_rate = 1.0;
  return chain;
}

namespace {

template <class Spec, class Fit>
std::vector<PosteriorChain> fit_chains(const Spec& spec, const McmcConfig& cfg, int n_threads,
                                       Fit fit) {
  std::vector<PosteriorChain> chains(static_cast<std::size_t>(cfg.n_chains));
  parallel_for(chains.size(), n_threads, [&](std::size_t k) {
    McmcConfig c = cfg;
    c.n_chains = 1;
    c.seed = derive_seed(cfg.seed, "chain", k);
    chains[k] = fit(spec, c);
  });
  return chains;
}

}  // namespace

std::vector<PosteriorChain> fit_logistic_chains(const LogisticModelSpec& spec,
                                                const McmcConfig& cfg, int n_threads) {
  return fit_chains(spec, cfg, n_threads,
                    [](const LogisticModelSpec& s, const McmcConfig& c) { return fit_logistic(s, c); });
}

std::vector<PosteriorChain> fit_linear_chains(const LinearModelSpec& spec, const McmcConfig& cfg,
                                              int n_threads) {
  return fit_chains(spec, cfg, n_threads,
                    [](const LinearModelSpec& s, const McmcConfig& c) { return fit_linear(s, c); });
}

double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 1.0;
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
    return 1.0;  // constant chain
  const double m = mean(x);
  double var = 0;
  for (double v : x) var += (v - m) * (v - m);
  var /= static_cast<double>(n);
  if (var <= 0 || !std::isfinite(var)) return 1.0;

  auto autocov = [&](std::size_t lag) {
    double acc = 0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - m) * (x[i + lag] - m);
    return acc / static_cast<double>(n);
  };

  // Geyer initial positive sequence on paired autocorrelations
  double tau = 1.0;
  for (std::size_t k = 1; 2 * k < n; ++k) {
    const double pair = (autocov(2 * k - 1) + autocov(2 * k)) / var;
    if (pair <= 0) break;
    tau += 2.0 * pair;
  }
  double ess = static_cast<double>(n) / tau;
  if (ess < 1.0) ess = 1.0;
  if (ess > static_cast<double>(n)) ess = static_cast<double>(n);
  return ess;
}

ChainDiagnostics diagnostics(const std::vector<PosteriorChain>& chains) {
  if (chains.empty()) throw std::invalid_argument("diagnostics: no chains");
  const int p = chains[0].n_params();
  for (const auto& c : chains) {
    if (c.n_params() != p) throw std::invalid_argument("diagnostics: chains disagree on dimension");
    if (c.n_post() < 100)
      throw std::invalid_argument("diagnostics: need >= 100 post-burn-in draws, have " +
                                  std::to_string(c.n_post()));
  }

  ChainDiagnostics d;
  d.param_names = chains[0].param_names;
  d.acceptance_rate = chains[0].acceptance_rate;
  d.ess.resize(static_cast<std::size_t>(p), 0.0);
  d.rhat.resize(static_cast<std::size_t>(p), 1.0);

  for (int j = 0; j < p; ++j) {
    // ESS: summed across chains
    double ess_total = 0;
    bool constant = false;
    for (const auto& c : chains) {
      std::vector<double> x(static_cast<std::size_t>(c.n_post()));
      for (int t = 0; t < c.n_post(); ++t) x[static_cast<std::size_t>(t)] = c.draws(c.burn_in + t, j);
      if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) constant = true;
      ess_total += effective_sample_size(x);
    }
    d.ess[static_cast<std::size_t>(j)] = constant ? 1.0 : ess_total;
    if (constant) d.degenerate = true;

    // R-hat: whole chains when several, split halves for a single chain
    std::vector<std::vector<double>> groups;
    if (chains.size() >= 2) {
      for (const auto& c : chains) {
        std::vector<double> x(static_cast<std::size_t>(c.n_post()));
        for (int t = 0; t < c.n_post(); ++t) x[static_cast<std::size_t>(t)] = c.draws(c.burn_in + t, j);
        groups.push_back(std::move(x));
      }
    } else {
      const auto& c = chains[0];
      const int half = c.n_post() / 2;
      std::vector<double> a(static_cast<std::size_t>(half)), b(static_cast<std::size_t>(half));
      for (int t = 0; t < half; ++t) {
        a[static_cast<std::size_t>(t)] = c.draws(c.burn_in + t, j);
        b[static_cast<std::size_t>(t)] = c.draws(c.burn_in + half + t, j);
      }
      groups.push_back(std::move(a));
      groups.push_back(std::move(b));
    }
    std::vector<double> means, vars;
    for (const auto& g : groups) {
      means.push_back(mean(g));
      vars.push_back(sample_variance(g));
    }
    const double w = mean(vars);
    const double b_over_n = sample_variance(means);
    // conservative potential scale reduction sqrt(1 + B/(nW)): exactly 1
    // when the between-group variance vanishes, never below 1
    double rhat = 1.0;
    if (w > 0) {
      rhat = std::sqrt(1.0 + b_over_n / w);
    } else if (b_over_n > 0) {
      rhat = std::numeric_limits<double>::infinity();
      d.degenerate = true;
    }
    d.rhat[static_cast<std::size_t>(j)] = rhat;
  }
  return d;
}

std::vector<PosteriorDraw> select_draws(const PosteriorChain& chain, int m, int gap) {
  if (m < 1) throw std::invalid_argument("select_draws: m < 1");
  if (gap < 1) throw std::invalid_argument("select_draws: gap must be >= 1 (independence spacing)");
  const long last = static_cast<long>(chain.burn_in) + static_cast<long>(m) * gap;
  if (last > chain.n_iterations())
    throw std::invalid_argument("select_draws: chain too short (need " + std::to_string(last) +
                                " iterations, have " + std::to_string(chain.n_iterations()) + ")");
  std::vector<PosteriorDraw> out;
  out.reserve(static_cast<std::size_t>(m));
  const int d = chain.has_sigma ? chain.n_params() - 1 : chain.n_params();
  for (int k = 1; k <= m; ++k) {
    // iteration numbers are 1-based; stored row is iteration - 1
    const int iteration = chain.burn_in + k * gap;
    const int row = iteration - 1;
    PosteriorDraw draw;
    draw.beta = chain.draws.row(row).head(d).transpose();
    if (chain.has_sigma) {
      draw.sigma = chain.draws(row, d);
      draw.has_sigma = true;
    }
    draw.iteration = iteration;
    out.push_back(std::move(draw));
  }
  return out;
}

int default_gap(const McmcConfig& cfg, int m) {
  if (m < 1) throw std::invalid_argument("default_gap: m < 1");
  const int span = cfg.n_iterations - cfg.burn_in;
  const int gap = span / m;
  if (gap < 1)
    throw std::invalid_argument("default_gap: chain too short for m = " + std::to_string(m));
  return gap;
}

std::string chain_csv(const PosteriorChain& chain) {
  std::string out = "iteration";
  for (const auto& name : chain.param_names) out += "," + name;
  out += ",log_posterior,accepted\n";
  char buf[64];
  for (int t = 0; t < chain.n_iterations(); ++t) {
    out += std::to_string(t + 1);
    for (int j = 0; j < chain.n_params(); ++j) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), chain.draws(t, j));
      (void)ec;
      out.append(1, ',').append(buf, p);
    }
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), chain.log_posterior[t]);
    (void)ec;
    out.append(1, ',').append(buf, p);
    out += chain.accepted.empty() ? ",1" : (chain.accepted[static_cast<std::size_t>(t)] ? ",1" : ",0");
    out += '\n';
  }
  return out;
}

}  // namespace synthgate::mcmc
