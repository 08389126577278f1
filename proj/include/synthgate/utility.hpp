#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthgate/rng.hpp"
#include "synthgate/stats.hpp"
#include "synthgate/synth.hpp"
#include "synthgate/tabular.hpp"

namespace synthgate::utility {

struct IntervalEstimate {
  double point = 0;
  double low = 0;
  double high = 0;
};

struct CombinedEstimate {
  double q_bar = 0;
  double b_m = 0;    // between-dataset variance of the point estimates
  double v_bar = 0;  // mean within-dataset variance
  double t_p = 0;    // total variance b_m/m + v_bar
  double v_p = 0;    // t degrees of freedom; +inf when b_m == 0
  double ci_low = 0;
  double ci_high = 0;
  double level = 0.95;
  bool degenerate_between = false;  // b_m == 0 path
};

CombinedEstimate combine(std::span<const double> q, std::span<const double> v,
                         double level = 0.95);

// symmetric overlap of two confidence intervals; 1 iff identical, negative
// when disjoint
double interval_overlap(const IntervalEstimate& orig, const IntervalEstimate& synth);

struct PropensityResult {
  double u_p = 0;
  bool separation_flag = false;
  int iterations = 0;
};

// membership logistic regression (0 = original, 1 = synthetic) on stacked
// covariate rows; maximum likelihood via ridge-stabilized IRLS (lambda 1e-8).
// Covariate matrices carry raw values (no intercept); standardization for
// conditioning happens internally and does not change fitted probabilities.
PropensityResult propensity_from_covariates(const Eigen::MatrixXd& original,
                                            const Eigen::MatrixXd& synthetic);

// dataset-level form: covariates = target variable + all predictors
PropensityResult propensity_u_p(const tabular::Dataset& original,
                                const tabular::Dataset& synthetic);

struct EcdfMeasures {
  double u_m = 0;  // max absolute ECDF gap over the merged points
  double u_s = 0;  // mean squared ECDF gap
};
EcdfMeasures ecdf_measures(std::span<const double> original, std::span<const double> synthetic);

// (q, v) = (sample mean, sample variance / n)
std::pair<double, double> mean_estimate(std::span<const double> values);

struct BootstrapQuantile {
  double point = 0;      // type-7 empirical quantile
  double low = 0;        // percentile interval of the replicates
  double high = 0;
  double boot_mean = 0;  // replicate mean, reported alongside the point
  double variance = 0;   // replicate variance, the v fed to combine()
};
BootstrapQuantile bootstrap_quantile(std::span<const double> values, double q_level, int B,
                                     double level, RngStream& rng);

struct OlsFit {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd var;  // squared standard errors
  double sigma2 = 0;
};
OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const std::vector<std::string>& names);
// OLS of the raw target on the dummy-coded predictors
OlsFit ols_coefficients(const tabular::Dataset& ds, bool log_target = false);

struct UtilityOptions {
  std::vector<double> quantiles{0.10, 0.80};
  int bootstrap_b = 1000;
  double ci_level = 0.95;
  bool regression_on_log = false;
  bool run_quantiles = true;
  bool run_regression = true;
  int kde_grid = 512;
  int n_threads = 1;
  std::uint64_t seed = 1;
};

struct AnalysisRow {
  std::string name;
  IntervalEstimate original;
  IntervalEstimate synthetic;
  double overlap = 0;
  CombinedEstimate combined;
  double original_boot_mean = 0;  // quantile analyses only
};

struct GlobalUtility {
  double u_p = 0, u_m = 0, u_s = 0;  // averages over the m merged datasets
  std::vector<double> u_p_per, u_m_per, u_s_per;
  int separation_count = 0;
};

struct DensityCurve {
  std::string source;
  KernelDensity kde;
};

struct ViolinRow {
  std::string source;
  FiveNumber summary;
};

struct UtilityReport {
  std::string method;
  GlobalUtility global;
  std::vector<AnalysisRow> analyses;
  std::vector<DensityCurve> densities;
  std::vector<ViolinRow> violin;
  int density_vector_index = 0;  // seeded selection out of the m vectors
};

UtilityReport utility_report(const tabular::Dataset& original,
                             const synth::SyntheticRelease& release, const UtilityOptions& opts);

nlohmann::json utility_report_json(const UtilityReport& report);

}  // namespace synthgate::utility
