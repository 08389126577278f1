#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "synthgate/tabular.hpp"

namespace synthgate::sim {

// NHIS-style validation data: seven predictors mirroring the survey variable
// kinds, a zero-inflated lognormal target generated from known two-phase
// truth. The phase-1 intercept is calibrated so the population zero rate
// equals zero_rate exactly.
struct SimSpec {
  std::size_t n = 5000;
  double zero_rate = 0.04;
  // slope coefficients on the dummy-coded raw design (intercept excluded,
  // calibrated from zero_rate); empty -> built-in defaults
  std::vector<double> phase1_slopes;
  // full coefficient vector including intercept; empty -> defaults
  std::vector<double> phase2_coef;
  double sigma = 0.7;

  void validate() const;
};

struct SimTruth {
  std::vector<std::string> design_columns;
  std::vector<double> phase1_beta;  // includes the calibrated intercept
  std::vector<double> phase2_beta;
  double sigma = 0;
  double zero_rate = 0;
};

struct SimResult {
  tabular::Dataset dataset;
  SimTruth truth;
};

std::vector<tabular::VariableSchema> nhis_like_schema();

SimResult simulate(const SimSpec& spec, std::uint64_t seed);

nlohmann::json truth_json(const SimTruth& truth);

}  // namespace synthgate::sim
