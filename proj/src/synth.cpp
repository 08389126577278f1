#include "synthgate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "synthgate/parallel.hpp"

namespace synthgate::synth {

std::string method_name(Method m) {
  return m == Method::two_phase ? "two-phase" : "single-phase";
}

Method method_from_name(const std::string& name) {
  if (name == "two-phase") return Method::two_phase;
  if (name == "single-phase") return Method::single_phase;
  throw std::invalid_argument("unknown synthesis method: " + name);
}

void SynthesisPlan::validate() const {
  if (m < 1) throw std::invalid_argument("plan: m < 1");
  if (single_phase_offset <= 0) throw std::invalid_argument("plan: offset c must be > 0");
  if (value_floor <= 0) throw std::invalid_argument("plan: value_floor must be > 0");
  phase1_cfg.validate();
  phase2_cfg.validate();
}

namespace {

double inv_logit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

std::vector<std::uint8_t> synthesize_phase1(const mcmc::PosteriorDraw& draw,
                                            const tabular::DesignMatrix& design, RngStream& rng) {
  if (draw.beta.size() != design.X.cols())
    throw std::invalid_argument("synthesize_phase1: draw dimension " +
                                std::to_string(draw.beta.size()) + " != design columns " +
                                std::to_string(design.X.cols()));
  const Eigen::VectorXd eta = design.X * draw.beta;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    out[static_cast<std::size_t>(i)] = rng.bernoulli(inv_logit(eta[i])) ? 1 : 0;
  return out;
}

std::vector<double> synthesize_phase2(const mcmc::PosteriorDraw& draw,
                                      const tabular::DesignMatrix& design,
                                      const std::vector<std::uint8_t>& phase1, RngStream& rng) {
  if (draw.beta.size() != design.X.cols())
    throw std::invalid_argument("synthesize_phase2: draw dimension mismatch");
  if (phase1.size() != static_cast<std::size_t>(design.X.rows()))
    throw std::invalid_argument("synthesize_phase2: phase1 length != design rows");
  if (!draw.has_sigma || !(draw.sigma > 0))
    throw std::invalid_argument("synthesize_phase2: draw lacks a positive sigma");

  std::vector<double> out(phase1.size(), 0.0);
  for (std::size_t i = 0; i < phase1.size(); ++i) {
    if (!phase1[i]) continue;  // exact zero, no draw consumed
    const double mu = design.X.row(static_cast<Eigen::Index>(i)).dot(draw.beta);
    out[i] = std::exp(rng.normal(mu, draw.sigma));
  }
  return out;
}

namespace {

void clamp_to_range(std::vector<double>& v, double lo, double hi) {
  for (double& x : v)
    if (x > 0) x = std::clamp(x, lo, hi);
}

}  // namespace

SynthesisResult synthesize_two_phase(const tabular::Dataset& ds, const SynthesisPlan& plan) {
  plan.validate();
  const auto forms = tabular::derive_income_forms(ds);
  const std::size_t n = ds.n();

  SynthesisResult res;
  res.models.design = tabular::design_matrix(ds, plan.encoding);
  const auto& design = res.models.design;

  // phase 1: logistic on all n rows, Income-B response
  mcmc::LogisticModelSpec p1;
  p1.design = design.X;
  p1.response.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    p1.response[static_cast<Eigen::Index>(i)] = forms.income_b[i];
  mcmc::McmcConfig cfg1 = plan.phase1_cfg;
  cfg1.seed = derive_seed(plan.master_seed, "fit/two-phase/phase1");
  res.models.phase1_chain = mcmc::fit_logistic(p1, cfg1);
  res.models.phase1_chain->param_names = design.col_names;

  // phase 2: linear on the n* originally non-zero rows, log Income-C response
  std::vector<std::size_t> pos_rows;
  for (std::size_t i = 0; i < n; ++i)
    if (forms.income_b[i]) pos_rows.push_back(i);
  if (pos_rows.empty())
    throw std::invalid_argument("synthesize_two_phase: no non-zero-income rows, phase 2 unfittable");
  mcmc::LinearModelSpec p2;
  p2.design = tabular::restrict_rows(design, pos_rows).X;
  p2.response.resize(static_cast<Eigen::Index>(pos_rows.size()));
  for (std::size_t k = 0; k < pos_rows.size(); ++k)
    p2.response[static_cast<Eigen::Index>(k)] = std::log(ds.target()[pos_rows[k]]);
  mcmc::McmcConfig cfg2 = plan.phase2_cfg;
  cfg2.seed = derive_seed(plan.master_seed, "fit/two-phase/phase2");
  res.models.value_chain = mcmc::fit_linear(p2, cfg2);
  res.models.value_chain.param_names = design.col_names;
  res.models.value_chain.param_names.push_back("sigma");

  res.models.phase1_draws =
      mcmc::select_draws(*res.models.phase1_chain, plan.m, mcmc::default_gap(cfg1, plan.m));
  res.models.value_draws =
      mcmc::select_draws(res.models.value_chain, plan.m, mcmc::default_gap(cfg2, plan.m));

  auto& rel = res.release;
  rel.method = Method::two_phase;
  rel.master_seed = plan.master_seed;
  rel.value_floor = plan.value_floor;
  rel.vectors.resize(static_cast<std::size_t>(plan.m));
  rel.phase1_draw_iters.resize(static_cast<std::size_t>(plan.m));
  rel.value_draw_iters.resize(static_cast<std::size_t>(plan.m));
  rel.n_syn_star.resize(static_cast<std::size_t>(plan.m));

  double obs_min = 0, obs_max = 0;
  if (plan.clamp_to_observed) {
    obs_min = *std::min_element(forms.income_c.begin(), forms.income_c.end());
    obs_max = *std::max_element(forms.income_c.begin(), forms.income_c.end());
  }

  // vector ell pairs phase-1 draw ell with phase-2 draw ell and owns its
  // RNG stream, so generation order (and thread count) cannot matter
  parallel_for(static_cast<std::size_t>(plan.m), plan.n_threads, [&](std::size_t ell) {
    RngStream rng(plan.master_seed, "synth/two-phase", ell);
    const auto ones = synthesize_phase1(res.models.phase1_draws[ell], design, rng);
    auto values = synthesize_phase2(res.models.value_draws[ell], design, ones, rng);
    if (plan.clamp_to_observed) clamp_to_range(values, obs_min, obs_max);
    rel.n_syn_star[ell] = static_cast<int>(std::count(ones.begin(), ones.end(), 1));
    rel.phase1_draw_iters[ell] = res.models.phase1_draws[ell].iteration;
    rel.value_draw_iters[ell] = res.models.value_draws[ell].iteration;
    rel.vectors[ell] = std::move(values);
  });
  return res;
}

SynthesisResult synthesize_single_phase(const tabular::Dataset& ds, const SynthesisPlan& plan) {
  plan.validate();
  const std::size_t n = ds.n();
  const double c = plan.single_phase_offset;

  SynthesisResult res;
  res.models.design = tabular::design_matrix(ds, plan.encoding);
  const auto& design = res.models.design;

  mcmc::LinearModelSpec spec;
  spec.design = design.X;
  spec.response.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double y = ds.target()[i];
    if (y < 0) throw std::invalid_argument("synthesize_single_phase: negative target");
    spec.response[static_cast<Eigen::Index>(i)] = std::log(y + c);
  }
  mcmc::McmcConfig cfg = plan.phase2_cfg;
  cfg.seed = derive_seed(plan.master_seed, "fit/single-phase");
  res.models.value_chain = mcmc::fit_linear(spec, cfg);
  res.models.value_chain.param_names = design.col_names;
  res.models.value_chain.param_names.push_back("sigma");
  res.models.value_draws =
      mcmc::select_draws(res.models.value_chain, plan.m, mcmc::default_gap(cfg, plan.m));

  auto& rel = res.release;
  rel.method = Method::single_phase;
  rel.master_seed = plan.master_seed;
  rel.offset_c = c;
  rel.value_floor = plan.value_floor;
  rel.vectors.resize(static_cast<std::size_t>(plan.m));
  rel.value_draw_iters.resize(static_cast<std::size_t>(plan.m));
  rel.n_syn_star.assign(static_cast<std::size_t>(plan.m), static_cast<int>(n));

  double obs_min = 0, obs_max = 0;
  if (plan.clamp_to_observed) {
    obs_min = *std::min_element(ds.target().begin(), ds.target().end());
    obs_max = *std::max_element(ds.target().begin(), ds.target().end());
  }

  parallel_for(static_cast<std::size_t>(plan.m), plan.n_threads, [&](std::size_t ell) {
    RngStream rng(plan.master_seed, "synth/single-phase", ell);
    const auto& draw = res.models.value_draws[ell];
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = design.X.row(static_cast<Eigen::Index>(i)).dot(draw.beta);
      const double z = rng.normal(mu, draw.sigma);
      values[i] = std::max(std::exp(z) - c, plan.value_floor);
    }
    if (plan.clamp_to_observed) clamp_to_range(values, obs_min, obs_max);
    rel.value_draw_iters[ell] = draw.iteration;
    rel.vectors[ell] = std::move(values);
  });
  return res;
}

}  // namespace synthgate::synth
