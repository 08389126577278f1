#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthgate/synth.hpp"
#include "synthgate/tabular.hpp"

namespace synthgate::risk {

struct MatchConfig {
  std::vector<std::string> known_vars{"Sex", "Race", "Education"};
  double radius = 0.3;  // fractional radius on the target value
  int n_threads = 1;

  void validate(const tabular::Dataset& ds) const;
};

struct RecordMatch {
  std::uint32_t c = 0;  // records tied at the highest match probability
  std::uint8_t t = 0;   // true match among them
  std::uint8_t k = 0;   // unique and true
  std::uint8_t f = 0;   // unique and false
};

// Bucketed matcher for one synthetic target vector: candidates agree with
// the target record on every known variable and carry a synthetic value
// inside [y(1-r), y(1+r)]; a zero-valued target matches synthetic zeros only.
class RecordMatcher {
 public:
  RecordMatcher(const tabular::Dataset& original, std::span<const double> synthetic_target,
                const MatchConfig& cfg);
  RecordMatch match(std::size_t record) const;
  std::size_t n() const { return keys_.size(); }

 private:
  std::vector<std::uint64_t> keys_;           // per original record
  std::vector<double> original_target_;
  std::vector<double> synthetic_target_;
  // key -> sorted synthetic values (with row ids) sharing that key
  struct Bucket {
    std::vector<double> values;      // sorted
    std::vector<std::size_t> rows;   // rows in this bucket (unsorted)
  };
  std::vector<std::pair<std::uint64_t, Bucket>> buckets_;  // sorted by key
  double radius_;
  const Bucket* find(std::uint64_t key) const;
};

RecordMatch match_record(std::size_t record, const tabular::Dataset& original,
                         std::span<const double> synthetic_target, const MatchConfig& cfg);
std::vector<RecordMatch> match_records(const tabular::Dataset& original,
                                       std::span<const double> synthetic_target,
                                       const MatchConfig& cfg);

struct IdentificationRiskReport {
  double expected_match_risk = 0;  // E
  double true_match_rate = 0;      // T
  double false_match_rate = 0;     // F
  std::size_t unique_matches = 0;  // s
  bool no_unique_flag = false;     // s == 0, F reported as 0
  std::vector<RecordMatch> per_record;
};

IdentificationRiskReport identification_risk(std::vector<RecordMatch> matches);

// probabilities over the 11 candidates after dividing by the total score;
// rank 1 = riskiest, ties resolved truth-first (conservative)
std::pair<std::vector<double>, int> normalize_candidate_scores(std::span<const double> scores,
                                                               std::size_t truth_index);

struct AttributeRiskOptions {
  int neighborhood = 10;   // alternatives per record; candidates = neighborhood + 1
  double bin_width = 1.0;  // dollars; makes the zero mass commensurable
  std::uint64_t seed = 1;
  int n_threads = 1;
  bool store_probabilities = false;  // keep all candidate probabilities per record
};

struct AttributeRiskReport {
  std::vector<double> truth_probability;  // per record
  std::vector<int> truth_rank;            // 1..candidates
  std::vector<std::vector<double>> probabilities;  // when store_probabilities
  int candidates = 11;
  double bin_width = 1.0;
  bool tie_flag = false;  // some record had tied scores at the top
};

// Scores each candidate value by the synthesis model's posterior-predictive
// density at the record's predictors, averaged over the m retained draws:
// two-phase uses mass (1-p_i) at 0 and p_i * LogNormal(y; mu_i, sigma) * bin
// width elsewhere; single-phase uses the shifted-lognormal density of
// log(y + c). Alternatives are sampled per record from the original target
// column, excluding entries equal to the record's own value.
AttributeRiskReport attribute_probabilities(const tabular::Dataset& original,
                                            const synth::SynthesisResult& fitted,
                                            const AttributeRiskOptions& opts);

struct MethodRisk {
  std::string method;
  IdentificationRiskReport identification;        // selected vector's per-record detail
  std::vector<double> e_per_vector, t_per_vector, f_per_vector;
  std::vector<std::size_t> s_per_vector;
  double e_mean = 0, t_mean = 0, f_mean = 0;
  AttributeRiskReport attribute;
  int selected_vector = 0;  // seeded selection used for per-record detail
};

struct RiskReport {
  std::vector<MethodRisk> methods;
};

RiskReport risk_report(const tabular::Dataset& original,
                       const std::vector<const synth::SynthesisResult*>& fitted,
                       const MatchConfig& cfg, const AttributeRiskOptions& attr_opts);

nlohmann::json risk_report_json(const RiskReport& report);

}  // namespace synthgate::risk
