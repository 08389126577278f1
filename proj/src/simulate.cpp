#include "synthgate/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "synthgate/rng.hpp"

namespace synthgate::sim {

void SimSpec::validate() const {
  if (n < 100) throw std::invalid_argument("simulate: n < 100");
  if (!(zero_rate > 0 && zero_rate < 1))
    throw std::invalid_argument("simulate: zero_rate outside (0,1)");
  if (sigma <= 0) throw std::invalid_argument("simulate: sigma <= 0");
}

std::vector<tabular::VariableSchema> nhis_like_schema() {
  using tabular::VarKind;
  using tabular::VarRole;
  std::vector<tabular::VariableSchema> s(8);
  s[0] = {"Income", VarKind::continuous, VarRole::target, {}, {}, {}, {}};
  s[1] = {"Age", VarKind::continuous, VarRole::predictor, {}, {}, {}, {}};
  s[2] = {"Sex", VarKind::binary, VarRole::predictor, {1, 2}, {}, {}, {}};
  s[3] = {"Race", VarKind::categorical, VarRole::predictor, {1, 2, 3, 4, 5}, {}, {}, {}};
  s[4] = {"Education", VarKind::categorical, VarRole::predictor, {1, 2, 3}, {}, {}, {}};
  s[5] = {"HoursWorked", VarKind::continuous, VarRole::predictor, {}, {}, {}, {}};
  s[6] = {"HealthInsurance", VarKind::binary, VarRole::predictor, {1, 2}, {}, {}, {}};
  s[7] = {"HomeOwnership", VarKind::categorical, VarRole::predictor, {1, 2, 3}, {}, {}, {}};
  return s;
}

namespace {

// design columns: (Intercept), Age, Sex=2, Race=2..5, Education=2..3,
// HoursWorked, HealthInsurance=2, HomeOwnership=2..3  -> 13 columns
constexpr int kDesignCols = 13;

// modest main effects on the raw (unstandardized) dummy design
const std::vector<double> kDefaultPhase1Slopes = {
    0.015,   // Age (per year)
    -0.25,   // Sex=2
    -0.15, -0.25, 0.10, -0.20,  // Race=2..5
    0.45, 0.85,                  // Education=2..3
    0.012,   // HoursWorked (per hour)
    -0.40,   // HealthInsurance=2
    -0.25, -0.45  // HomeOwnership=2..3
};

const std::vector<double> kDefaultPhase2Coef = {
    9.55,    // intercept (log dollars)
    0.010,   // Age
    -0.15,   // Sex=2
    -0.08, -0.12, 0.06, -0.10,  // Race=2..5
    0.35, 0.70,                  // Education=2..3
    0.011,   // HoursWorked
    -0.20,   // HealthInsurance=2
    -0.12, -0.22  // HomeOwnership=2..3
};

int categorical_draw(RngStream& rng, const std::vector<double>& probs) {
  const double u = rng.uniform01();
  double acc = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(probs.size());
}

}  // namespace

SimResult simulate(const SimSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::vector<double>& slopes =
      spec.phase1_slopes.empty() ? kDefaultPhase1Slopes : spec.phase1_slopes;
  const std::vector<double>& p2 =
      spec.phase2_coef.empty() ? kDefaultPhase2Coef : spec.phase2_coef;
  if (slopes.size() != kDesignCols - 1)
    throw std::invalid_argument("simulate: phase1_slopes must have 12 entries");
  if (p2.size() != kDesignCols)
    throw std::invalid_argument("simulate: phase2_coef must have 13 entries");

  auto schema = nhis_like_schema();
  const std::size_t n = spec.n;
  std::vector<std::vector<double>> cols(schema.size(), std::vector<double>(n));

  RngStream rng(seed, "simulate/predictors");
  for (std::size_t i = 0; i < n; ++i) {
    cols[1][i] = static_cast<double>(18 + rng.uniform_below(68));  // Age 18..85
    cols[2][i] = rng.bernoulli(0.5) ? 2 : 1;                       // Sex
    cols[3][i] = categorical_draw(rng, {0.62, 0.12, 0.02, 0.06, 0.18});  // Race
    cols[4][i] = categorical_draw(rng, {0.45, 0.38, 0.17});              // Education
    cols[5][i] = static_cast<double>(1 + rng.uniform_below(95));   // HoursWorked 1..95
    cols[6][i] = rng.bernoulli(0.12) ? 2 : 1;                      // HealthInsurance
    cols[7][i] = categorical_draw(rng, {0.64, 0.30, 0.06});        // HomeOwnership
  }

  tabular::Dataset ds(schema, std::move(cols));
  tabular::EncodingOptions enc;
  enc.standardize_continuous = false;  // truth lives on the raw dummy design
  const auto design = tabular::design_matrix(ds, enc);
  if (design.X.cols() != kDesignCols)
    throw std::logic_error("simulate: unexpected design width");

  // eta without intercept, then calibrate the intercept by bisection so the
  // population mean of logit^-1(b0 + eta) is exactly 1 - zero_rate
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (int j = 1; j < kDesignCols; ++j)
    eta += design.X.col(j) * slopes[static_cast<std::size_t>(j - 1)];

  auto mean_p = [&](double b0) {
    double acc = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double e = b0 + eta[i];
      acc += e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    }
    return acc / static_cast<double>(n);
  };
  const double want = 1.0 - spec.zero_rate;
  double lo = -30, hi = 30;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_p(mid) < want) lo = mid;
    else hi = mid;
  }
  const double b0 = 0.5 * (lo + hi);

  RngStream rng_target(seed, "simulate/target");
  std::vector<double> income(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = b0 + eta[static_cast<Eigen::Index>(i)];
    const double p = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    if (!rng_target.bernoulli(p)) {
      income[i] = 0.0;
      continue;
    }
    double mu = 0;
    for (int j = 0; j < kDesignCols; ++j)
      mu += design.X(static_cast<Eigen::Index>(i), j) * p2[static_cast<std::size_t>(j)];
    income[i] = std::round(std::exp(rng_target.normal(mu, spec.sigma)) * 100.0) / 100.0;
    if (income[i] <= 0) income[i] = 0.01;  // rounding floor, keeps Income-B consistent
  }

  SimResult res{ds.with_target(income), {}};
  res.truth.design_columns = design.col_names;
  res.truth.phase1_beta.push_back(b0);
  res.truth.phase1_beta.insert(res.truth.phase1_beta.end(), slopes.begin(), slopes.end());
  res.truth.phase2_beta = p2;
  res.truth.sigma = spec.sigma;
  res.truth.zero_rate = spec.zero_rate;
  return res;
}

nlohmann::json truth_json(const SimTruth& truth) {
  return nlohmann::json{{"design_columns", truth.design_columns},
                        {"phase1_beta", truth.phase1_beta},
                        {"phase2_beta", truth.phase2_beta},
                        {"sigma", truth.sigma},
                        {"zero_rate", truth.zero_rate}};
}

}  // namespace synthgate::sim
