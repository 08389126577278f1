#include "synthgate/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "synthgate/parallel.hpp"
#include "synthgate/util.hpp"

namespace synthgate::utility {

CombinedEstimate combine(std::span<const double> q, std::span<const double> v, double level) {
  const std::size_t m = q.size();
  if (m < 2) throw std::invalid_argument("combine: need m >= 2 estimates");
  if (v.size() != m) throw std::invalid_argument("combine: q/v length mismatch");
  if (!(level > 0 && level < 1)) throw std::invalid_argument("combine: level outside (0,1)");
  for (double x : v)
    if (x < 0) throw std::invalid_argument("combine: negative variance estimate");

  CombinedEstimate c;
  c.level = level;
  c.q_bar = mean(q);
  c.b_m = sample_variance(q);
  c.v_bar = mean(v);
  const double md = static_cast<double>(m);
  c.t_p = c.b_m / md + c.v_bar;

  if (c.b_m > 0) {
    c.v_p = (md - 1.0) * (1.0 + c.v_bar / (c.b_m / md));
  } else {
    // between-variance collapsed: t_p = v_bar and the t reference degrades
    // to a normal
    c.v_p = std::numeric_limits<double>::infinity();
    c.degenerate_between = true;
  }
  const double p = 1.0 - (1.0 - level) / 2.0;
  const double t = std::isfinite(c.v_p) ? student_t_quantile(p, c.v_p) : normal_quantile(p);
  const double half = t * std::sqrt(c.t_p);
  c.ci_low = c.q_bar - half;
  c.ci_high = c.q_bar + half;
  return c;
}

double interval_overlap(const IntervalEstimate& orig, const IntervalEstimate& synth) {
  if (!(orig.low < orig.high) || !(synth.low < synth.high))
    throw std::invalid_argument("interval_overlap: degenerate interval");
  const double li = std::max(orig.low, synth.low);
  const double ui = std::min(orig.high, synth.high);
  return (ui - li) / (2.0 * (orig.high - orig.low)) + (ui - li) / (2.0 * (synth.high - synth.low));
}

namespace {

double stable_sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

constexpr double kRidge = 1e-8;

}  // namespace

PropensityResult propensity_from_covariates(const Eigen::MatrixXd& original,
                                            const Eigen::MatrixXd& synthetic) {
  if (original.rows() == 0 || synthetic.rows() == 0)
    throw std::invalid_argument("propensity: empty input");
  if (original.cols() != synthetic.cols())
    throw std::invalid_argument("propensity: covariate dimension mismatch");

  const Eigen::Index n_o = original.rows();
  const Eigen::Index n_s = synthetic.rows();
  const Eigen::Index n = n_o + n_s;
  const Eigen::Index p_raw = original.cols();

  // stack, standardize non-constant columns (conditioning only; fitted
  // probabilities are invariant to this affine map), prepend intercept
  Eigen::MatrixXd X(n, p_raw + 1);
  X.col(0).setOnes();
  for (Eigen::Index j = 0; j < p_raw; ++j) {
    Eigen::VectorXd col(n);
    col.head(n_o) = original.col(j);
    col.tail(n_s) = synthetic.col(j);
    const double m = col.mean();
    double sd = std::sqrt((col.array() - m).square().sum() / static_cast<double>(n - 1));
    if (sd > 0)
      X.col(j + 1) = (col.array() - m) / sd;
    else
      X.col(j + 1).setZero();  // constant column carries no information
  }
  Eigen::VectorXd y(n);
  y.head(n_o).setZero();
  y.tail(n_s).setOnes();

  const Eigen::Index p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd prob(n), w(n);

  PropensityResult res;
  const int max_iter = 200;
  int it = 0;
  for (; it < max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = stable_sigmoid(eta[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
    }
    Eigen::VectorXd grad = X.transpose() * (y - prob) - kRidge * beta;
    Eigen::MatrixXd hess = X.transpose() * w.asDiagonal() * X;
    hess.diagonal().array() += kRidge;
    Eigen::VectorXd step = hess.llt().solve(grad);
    // damp so the linear predictor moves at most 10 per iteration; under
    // separation the undamped Newton step explodes once the weights vanish
    const double eta_move = (X * step).lpNorm<Eigen::Infinity>();
    if (eta_move > 10.0) step *= 10.0 / eta_move;
    beta += step;
    eta = X * beta;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10 || grad.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  res.iterations = it;

  double acc = 0;
  bool extreme = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = stable_sigmoid(eta[i]);
    acc += (pi - 0.5) * (pi - 0.5);
    if (pi < 1e-8 || pi > 1.0 - 1e-8) extreme = true;
  }
  res.u_p = acc / static_cast<double>(n);
  res.separation_flag = extreme || eta.lpNorm<Eigen::Infinity>() > 15.0;
  return res;
}

PropensityResult propensity_u_p(const tabular::Dataset& original,
                                const tabular::Dataset& synthetic) {
  if (original.n() != synthetic.n())
    throw std::invalid_argument("propensity_u_p: datasets must have equal row counts");
  if (original.n_vars() != synthetic.n_vars())
    throw std::invalid_argument("propensity_u_p: schema mismatch");

  // main effects of the target plus all predictors, dummy-coded as in the
  // synthesis design (intercept dropped: the fit adds its own)
  auto build = [](const tabular::Dataset& ds) {
    tabular::EncodingOptions opts;
    opts.standardize_continuous = false;
    const auto dm = tabular::design_matrix(ds, opts);
    Eigen::MatrixXd covs(dm.X.rows(), dm.X.cols());  // target + dummies, no intercept
    covs.col(0) = Eigen::Map<const Eigen::VectorXd>(ds.target().data(),
                                                    static_cast<Eigen::Index>(ds.n()));
    covs.rightCols(dm.X.cols() - 1) = dm.X.rightCols(dm.X.cols() - 1);
    return covs;
  };
  return propensity_from_covariates(build(original), build(synthetic));
}

EcdfMeasures ecdf_measures(std::span<const double> original, std::span<const double> synthetic) {
  if (original.empty() || synthetic.empty())
    throw std::invalid_argument("ecdf_measures: empty input");
  std::vector<double> o(original.begin(), original.end());
  std::vector<double> s(synthetic.begin(), synthetic.end());
  std::sort(o.begin(), o.end());
  std::sort(s.begin(), s.end());
  std::vector<double> merged;
  merged.reserve(o.size() + s.size());
  std::merge(o.begin(), o.end(), s.begin(), s.end(), std::back_inserter(merged));

  const double no = static_cast<double>(o.size());
  const double ns = static_cast<double>(s.size());
  double max_gap = 0, sq_sum = 0;
  for (double t : merged) {
    // ECDF(t) = #{x <= t}/n; upper_bound counts exactly that on sorted data
    const double d_o =
        static_cast<double>(std::upper_bound(o.begin(), o.end(), t) - o.begin()) / no;
    const double d_s =
        static_cast<double>(std::upper_bound(s.begin(), s.end(), t) - s.begin()) / ns;
    const double gap = std::fabs(d_o - d_s);
    max_gap = std::max(max_gap, gap);
    sq_sum += gap * gap;
  }
  return {max_gap, sq_sum / static_cast<double>(merged.size())};
}

std::pair<double, double> mean_estimate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_estimate: empty input");
  return {mean(values), sample_variance(values) / static_cast<double>(values.size())};
}

BootstrapQuantile bootstrap_quantile(std::span<const double> values, double q_level, int B,
                                     double level, RngStream& rng) {
  if (values.empty()) throw std::invalid_argument("bootstrap_quantile: empty input");
  if (!(q_level > 0 && q_level < 1))
    throw std::invalid_argument("bootstrap_quantile: q_level outside (0,1)");
  if (B < 100) throw std::invalid_argument("bootstrap_quantile: B < 100");

  const std::size_t n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BootstrapQuantile out;
  out.point = quantile_type7_sorted(sorted, q_level);

  std::vector<double> reps(static_cast<std::size_t>(B));
  std::vector<double> resample(n);
  for (int b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i)
      resample[i] = sorted[rng.uniform_below(n)];
    std::sort(resample.begin(), resample.end());
    reps[static_cast<std::size_t>(b)] = quantile_type7_sorted(resample, q_level);
  }
  out.boot_mean = mean(reps);
  out.variance = sample_variance(reps);
  std::sort(reps.begin(), reps.end());
  const double alpha = 1.0 - level;
  out.low = quantile_type7_sorted(reps, alpha / 2.0);
  out.high = quantile_type7_sorted(reps, 1.0 - alpha / 2.0);
  return out;
}

OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const std::vector<std::string>& names) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw std::invalid_argument("ols: response length mismatch");
  if (n <= p) throw std::invalid_argument("ols: need more rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) throw std::invalid_argument("ols: design is rank deficient");

  OlsFit fit;
  fit.names = names;
  fit.coef = qr.solve(y);
  const Eigen::VectorXd resid = y - X * fit.coef;
  fit.sigma2 = resid.squaredNorm() / static_cast<double>(n - p);
  const Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).llt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.var = fit.sigma2 * xtx_inv.diagonal();
  return fit;
}

OlsFit ols_coefficients(const tabular::Dataset& ds, bool log_target) {
  tabular::EncodingOptions opts;
  opts.standardize_continuous = false;  // coefficients in original units
  const auto dm = tabular::design_matrix(ds, opts);
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.n()));
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double t = ds.target()[i];
    y[static_cast<Eigen::Index>(i)] = log_target ? std::log1p(t) : t;
  }
  return ols_fit(dm.X, y, dm.col_names);
}

namespace {

IntervalEstimate t_interval(double q, double v, double df, double level) {
  const double t = student_t_quantile(1.0 - (1.0 - level) / 2.0, df);
  const double half = t * std::sqrt(v);
  return {q, q - half, q + half};
}

}  // namespace

UtilityReport utility_report(const tabular::Dataset& original,
                             const synth::SyntheticRelease& release,
                             const UtilityOptions& opts) {
  const std::size_t m = release.m();
  const std::size_t n = original.n();
  if (m == 0) throw std::invalid_argument("utility_report: empty release");
  if (release.n() != n) throw std::invalid_argument("utility_report: release not aligned");
  if (m < 2) throw std::invalid_argument("utility_report: combining rules need m >= 2");

  UtilityReport rep;
  rep.method = synth::method_name(release.method);

  // ---- global measures, one merged pair per vector, averaged in index order
  auto& g = rep.global;
  g.u_p_per.resize(m);
  g.u_m_per.resize(m);
  g.u_s_per.resize(m);
  std::vector<int> sep(m, 0);
  const auto& target = original.target();
  parallel_for(m, opts.n_threads, [&](std::size_t ell) {
    const auto synthetic = original.with_target(release.vectors[ell]);
    const auto pr = propensity_u_p(original, synthetic);
    g.u_p_per[ell] = pr.u_p;
    sep[ell] = pr.separation_flag ? 1 : 0;
    const auto ec = ecdf_measures(target, release.vectors[ell]);
    g.u_m_per[ell] = ec.u_m;
    g.u_s_per[ell] = ec.u_s;
  });
  g.u_p = mean(g.u_p_per);
  g.u_m = mean(g.u_m_per);
  g.u_s = mean(g.u_s_per);
  for (int s : sep) g.separation_count += s;

  // ---- analysis-specific measures through the combining rules
  const double level = opts.ci_level;

  {  // mean of the target
    auto [q_o, v_o] = mean_estimate(target);
    const auto orig = t_interval(q_o, v_o, static_cast<double>(n - 1), level);
    std::vector<double> qs(m), vs(m);
    for (std::size_t ell = 0; ell < m; ++ell) {
      auto [q, v] = mean_estimate(release.vectors[ell]);
      qs[ell] = q;
      vs[ell] = v;
    }
    AnalysisRow row;
    row.name = "mean";
    row.original = orig;
    row.combined = combine(qs, vs, level);
    row.synthetic = {row.combined.q_bar, row.combined.ci_low, row.combined.ci_high};
    row.overlap = interval_overlap(row.original, row.synthetic);
    rep.analyses.push_back(std::move(row));
  }

  if (opts.run_quantiles) {
    for (double q_level : opts.quantiles) {
      RngStream rng_o(opts.seed, "utility/boot/original",
                      static_cast<std::uint64_t>(q_level * 1e6));
      const auto bo = bootstrap_quantile(target, q_level, opts.bootstrap_b, level, rng_o);
      std::vector<double> qs(m), vs(m);
      parallel_for(m, opts.n_threads, [&](std::size_t ell) {
        RngStream rng(opts.seed, "utility/boot/" + rep.method + "/" + std::to_string(q_level),
                      ell);
        const auto b = bootstrap_quantile(release.vectors[ell], q_level, opts.bootstrap_b,
                                          level, rng);
        qs[ell] = b.point;
        vs[ell] = b.variance;
      });
      AnalysisRow row;
      row.name = "quantile_" + format_double(q_level);
      row.original = {bo.point, bo.low, bo.high};
      row.original_boot_mean = bo.boot_mean;
      row.combined = combine(qs, vs, level);
      row.synthetic = {row.combined.q_bar, row.combined.ci_low, row.combined.ci_high};
      row.overlap = interval_overlap(row.original, row.synthetic);
      rep.analyses.push_back(std::move(row));
    }
  }

  if (opts.run_regression) {
    const auto orig_fit = ols_coefficients(original, opts.regression_on_log);
    const std::size_t p = static_cast<std::size_t>(orig_fit.coef.size());
    std::vector<OlsFit> fits(m);
    parallel_for(m, opts.n_threads, [&](std::size_t ell) {
      const auto ds_ell = original.with_target(release.vectors[ell]);
      fits[ell] = ols_coefficients(ds_ell, opts.regression_on_log);
    });
    const double df = static_cast<double>(n) - static_cast<double>(p);
    for (std::size_t j = 0; j < p; ++j) {
      std::vector<double> qs(m), vs(m);
      for (std::size_t ell = 0; ell < m; ++ell) {
        qs[ell] = fits[ell].coef[static_cast<Eigen::Index>(j)];
        vs[ell] = fits[ell].var[static_cast<Eigen::Index>(j)];
      }
      AnalysisRow row;
      row.name = "coef_" + orig_fit.names[j];
      row.original = t_interval(orig_fit.coef[static_cast<Eigen::Index>(j)],
                                orig_fit.var[static_cast<Eigen::Index>(j)], df, level);
      row.combined = combine(qs, vs, level);
      row.synthetic = {row.combined.q_bar, row.combined.ci_low, row.combined.ci_high};
      row.overlap = interval_overlap(row.original, row.synthetic);
      rep.analyses.push_back(std::move(row));
    }
  }

  // ---- marginal plot data on a seeded randomly selected vector
  RngStream pick(opts.seed, "utility/density-vector");
  rep.density_vector_index = static_cast<int>(pick.uniform_below(m));
  const auto& chosen = release.vectors[static_cast<std::size_t>(rep.density_vector_index)];
  rep.densities.push_back({"original", kernel_density(target, opts.kde_grid)});
  rep.densities.push_back({rep.method, kernel_density(chosen, opts.kde_grid)});
  rep.violin.push_back({"original", five_number_summary(target)});
  rep.violin.push_back({rep.method, five_number_summary(chosen)});
  return rep;
}

nlohmann::json utility_report_json(const UtilityReport& rep) {
  nlohmann::json j;
  j["method"] = rep.method;
  j["global"] = {{"u_p", rep.global.u_p},
                 {"u_m", rep.global.u_m},
                 {"u_s", rep.global.u_s},
                 {"u_p_per_vector", rep.global.u_p_per},
                 {"u_m_per_vector", rep.global.u_m_per},
                 {"u_s_per_vector", rep.global.u_s_per},
                 {"separation_count", rep.global.separation_count}};
  j["analyses"] = nlohmann::json::array();
  for (const auto& a : rep.analyses) {
    nlohmann::json row;
    row["name"] = a.name;
    row["original"] = {{"point", a.original.point}, {"low", a.original.low}, {"high", a.original.high}};
    row["synthetic"] = {{"point", a.synthetic.point}, {"low", a.synthetic.low}, {"high", a.synthetic.high}};
    row["overlap"] = a.overlap;
    row["combined"] = {{"q_bar", a.combined.q_bar},
                       {"b_m", a.combined.b_m},
                       {"v_bar", a.combined.v_bar},
                       {"t_p", a.combined.t_p},
                       {"v_p", std::isfinite(a.combined.v_p) ? nlohmann::json(a.combined.v_p)
                                                             : nlohmann::json("inf")},
                       {"degenerate_between", a.combined.degenerate_between}};
    if (a.name.rfind("quantile_", 0) == 0) row["original_boot_mean"] = a.original_boot_mean;
    j["analyses"].push_back(std::move(row));
  }
  j["density_vector_index"] = rep.density_vector_index;
  return j;
}

}  // namespace synthgate::utility
