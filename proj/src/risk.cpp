#include "synthgate/risk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "synthgate/parallel.hpp"

namespace synthgate::risk {

void MatchConfig::validate(const tabular::Dataset& ds) const {
  if (known_vars.empty()) throw std::invalid_argument("risk: known_vars is empty");
  if (!(radius > 0)) throw std::invalid_argument("risk: radius must be > 0");
  for (const auto& name : known_vars) {
    const int j = ds.column_index(name);
    if (j < 0) throw std::invalid_argument("risk: unknown column in known_vars: " + name);
    const auto& v = ds.schema()[static_cast<std::size_t>(j)];
    if (v.kind == tabular::VarKind::continuous)
      throw std::invalid_argument("risk: known_vars must be categorical/binary: " + name);
    if (v.role == tabular::VarRole::target)
      throw std::invalid_argument("risk: known_vars cannot include the synthesized target");
  }
}

namespace {

struct BucketIndex {
  std::vector<std::size_t> record_bucket;            // per record
  std::vector<std::vector<std::size_t>> bucket_rows; // rows per bucket
};

BucketIndex build_buckets(const tabular::Dataset& ds, const std::vector<std::string>& vars) {
  BucketIndex idx;
  idx.record_bucket.resize(ds.n());
  std::map<std::vector<int>, std::size_t> seen;
  std::vector<const std::vector<double>*> cols;
  for (const auto& v : vars) cols.push_back(&ds.column(v));
  std::vector<int> key(vars.size());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) key[k] = static_cast<int>((*cols[k])[i]);
    auto [it, inserted] = seen.emplace(key, idx.bucket_rows.size());
    if (inserted) idx.bucket_rows.emplace_back();
    idx.bucket_rows[it->second].push_back(i);
    idx.record_bucket[i] = it->second;
  }
  return idx;
}

}  // namespace

RecordMatcher::RecordMatcher(const tabular::Dataset& original,
                             std::span<const double> synthetic_target, const MatchConfig& cfg)
    : radius_(cfg.radius) {
  cfg.validate(original);
  if (synthetic_target.size() != original.n())
    throw std::invalid_argument("risk: synthetic target not aligned to original rows");

  original_target_.assign(original.target().begin(), original.target().end());
  synthetic_target_.assign(synthetic_target.begin(), synthetic_target.end());

  const auto idx = build_buckets(original, cfg.known_vars);
  keys_.assign(idx.record_bucket.begin(), idx.record_bucket.end());
  buckets_.resize(idx.bucket_rows.size());
  for (std::size_t b = 0; b < idx.bucket_rows.size(); ++b) {
    auto& bucket = buckets_[b].second;
    buckets_[b].first = b;
    bucket.rows = idx.bucket_rows[b];
    bucket.values.reserve(bucket.rows.size());
    for (std::size_t r : bucket.rows) bucket.values.push_back(synthetic_target_[r]);
    std::sort(bucket.values.begin(), bucket.values.end());
  }
}

const RecordMatcher::Bucket* RecordMatcher::find(std::uint64_t key) const {
  return &buckets_[static_cast<std::size_t>(key)].second;
}

RecordMatch RecordMatcher::match(std::size_t record) const {
  if (record >= keys_.size()) throw std::out_of_range("risk: record index out of range");
  const Bucket* bucket = find(keys_[record]);
  const double y = original_target_[record];

  std::uint32_t c = 0;
  bool self_in = false;
  if (y == 0.0) {
    // percentage radius degenerates at zero: the interval is exactly {0}
    c = static_cast<std::uint32_t>(
        std::count(bucket->values.begin(), bucket->values.end(), 0.0));
    self_in = synthetic_target_[record] == 0.0;
  } else {
    const double lo = y * (1.0 - radius_);
    const double hi = y * (1.0 + radius_);
    const auto first = std::lower_bound(bucket->values.begin(), bucket->values.end(), lo);
    const auto last = std::upper_bound(bucket->values.begin(), bucket->values.end(), hi);
    c = static_cast<std::uint32_t>(last - first);
    const double own = synthetic_target_[record];
    self_in = own >= lo && own <= hi;
  }

  RecordMatch m;
  m.c = c;
  m.t = self_in ? 1 : 0;
  m.k = (c == 1 && m.t) ? 1 : 0;
  m.f = (c == 1 && !m.t) ? 1 : 0;
  return m;
}

RecordMatch match_record(std::size_t record, const tabular::Dataset& original,
                         std::span<const double> synthetic_target, const MatchConfig& cfg) {
  return RecordMatcher(original, synthetic_target, cfg).match(record);
}

std::vector<RecordMatch> match_records(const tabular::Dataset& original,
                                       std::span<const double> synthetic_target,
                                       const MatchConfig& cfg) {
  RecordMatcher matcher(original, synthetic_target, cfg);
  std::vector<RecordMatch> out(original.n());
  parallel_for(original.n(), cfg.n_threads, [&](std::size_t i) { out[i] = matcher.match(i); });
  return out;
}

IdentificationRiskReport identification_risk(std::vector<RecordMatch> matches) {
  if (matches.empty()) throw std::invalid_argument("identification_risk: empty match list");
  const double n = static_cast<double>(matches.size());
  IdentificationRiskReport rep;
  double e = 0;
  std::size_t k_sum = 0, f_sum = 0, s = 0;
  for (const auto& m : matches) {
    if (m.c > 0 && m.t) e += 1.0 / static_cast<double>(m.c);  // c = 0 contributes 0
    k_sum += m.k;
    f_sum += m.f;
    if (m.c == 1) ++s;
  }
  rep.expected_match_risk = e / n;
  rep.true_match_rate = static_cast<double>(k_sum) / n;
  rep.unique_matches = s;
  if (s > 0) {
    rep.false_match_rate = static_cast<double>(f_sum) / static_cast<double>(s);
  } else {
    rep.false_match_rate = 0;
    rep.no_unique_flag = true;
  }
  rep.per_record = std::move(matches);
  return rep;
}

std::pair<std::vector<double>, int> normalize_candidate_scores(std::span<const double> scores,
                                                               std::size_t truth_index) {
  if (scores.empty()) throw std::invalid_argument("normalize_candidate_scores: empty scores");
  if (truth_index >= scores.size())
    throw std::invalid_argument("normalize_candidate_scores: truth index out of range");
  double total = 0;
  for (double s : scores) {
    if (s < 0 || !std::isfinite(s))
      throw std::invalid_argument("normalize_candidate_scores: scores must be finite and >= 0");
    total += s;
  }
  std::vector<double> probs(scores.size());
  if (total <= 0) {
    // every candidate underflowed; fall back to the uniform distribution
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(scores.size()));
  } else {
    for (std::size_t i = 0; i < scores.size(); ++i) probs[i] = scores[i] / total;
  }
  // rank 1 = riskiest; ties resolved truth-first (conservative)
  int rank = 1;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > probs[truth_index]) ++rank;
  return {std::move(probs), rank};
}

namespace {

double inv_logit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

constexpr double kLogHalfTau = 0.9189385332046727;  // log(sqrt(2*pi))

}  // namespace

AttributeRiskReport attribute_probabilities(const tabular::Dataset& original,
                                            const synth::SynthesisResult& fitted,
                                            const AttributeRiskOptions& opts) {
  const std::size_t n = original.n();
  const auto& release = fitted.release;
  const auto& models = fitted.models;
  if (opts.neighborhood < 1) throw std::invalid_argument("attribute risk: neighborhood < 1");
  if (!(opts.bin_width > 0)) throw std::invalid_argument("attribute risk: bin_width <= 0");
  if (models.value_draws.empty())
    throw std::invalid_argument("attribute risk: fitted model chains missing");
  const bool two_phase = release.method == synth::Method::two_phase;
  if (two_phase && models.phase1_draws.empty())
    throw std::invalid_argument("attribute risk: phase-1 draws missing");

  const std::size_t m = models.value_draws.size();
  const auto& X = models.design.X;
  if (static_cast<std::size_t>(X.rows()) != n)
    throw std::invalid_argument("attribute risk: design not aligned");

  // linear predictors for every retained draw, built once
  Eigen::MatrixXd mu(n, m);
  Eigen::VectorXd sigma(m);
  for (std::size_t ell = 0; ell < m; ++ell) {
    mu.col(static_cast<Eigen::Index>(ell)) = X * models.value_draws[ell].beta;
    sigma[static_cast<Eigen::Index>(ell)] = models.value_draws[ell].sigma;
  }
  Eigen::MatrixXd p1;  // two-phase: P(non-zero) per record and draw
  if (two_phase) {
    p1.resize(n, m);
    for (std::size_t ell = 0; ell < m; ++ell) {
      Eigen::VectorXd eta = X * models.phase1_draws[ell].beta;
      for (std::size_t i = 0; i < n; ++i)
        p1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ell)) = inv_logit(eta[static_cast<Eigen::Index>(i)]);
    }
  }

  const auto& target = original.target();
  const double log_bin = std::log(opts.bin_width);
  const int k_cand = opts.neighborhood + 1;

  AttributeRiskReport rep;
  rep.candidates = k_cand;
  rep.bin_width = opts.bin_width;
  rep.truth_probability.resize(n);
  rep.truth_rank.resize(n);
  if (opts.store_probabilities) rep.probabilities.resize(n);
  std::vector<std::uint8_t> tie(n, 0);

  // log posterior-predictive score of one candidate value for record i,
  // averaged over the retained draws in density space (log-sum-exp)
  auto log_score = [&](std::size_t i, double y) {
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(m);
    for (std::size_t ell = 0; ell < m; ++ell) {
      const double mu_il = mu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ell));
      const double sd = sigma[static_cast<Eigen::Index>(ell)];
      double lt;
      if (two_phase) {
        const double p = p1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ell));
        if (y == 0.0) {
          lt = std::log1p(-p);
        } else {
          const double z = (std::log(y) - mu_il) / sd;
          lt = std::log(p) - 0.5 * z * z - std::log(sd) - std::log(y) - kLogHalfTau + log_bin;
        }
      } else {
        const double shifted = y + release.offset_c;
        const double z = (std::log(shifted) - mu_il) / sd;
        lt = -0.5 * z * z - std::log(sd) - std::log(shifted) - kLogHalfTau + log_bin;
      }
      terms[ell] = lt;
      max_term = std::max(max_term, lt);
    }
    if (!std::isfinite(max_term)) return -std::numeric_limits<double>::infinity();
    double acc = 0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc / static_cast<double>(m));
  };

  std::vector<std::uint8_t> degenerate(n, 0);  // no throwing inside the omp body
  parallel_for(n, opts.n_threads, [&](std::size_t i) {
    const double truth = target[i];

    // eligible alternative pool: every entry whose value differs from truth
    std::vector<std::size_t> pool;
    pool.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
      if (target[j] != truth) pool.push_back(j);
    if (pool.size() < static_cast<std::size_t>(opts.neighborhood)) {
      degenerate[i] = 1;
      return;
    }

    RngStream rng(opts.seed, "risk/attr-alternatives", i);
    for (int k = 0; k < opts.neighborhood; ++k) {
      const std::size_t j = static_cast<std::size_t>(k) +
                            rng.uniform_below(pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
    }

    std::vector<double> log_scores(static_cast<std::size_t>(k_cand));
    log_scores[0] = log_score(i, truth);  // truth first
    for (int k = 0; k < opts.neighborhood; ++k)
      log_scores[static_cast<std::size_t>(k + 1)] =
          log_score(i, target[pool[static_cast<std::size_t>(k)]]);

    // shift by the max before exponentiating; the normalized result is
    // invariant to this rescaling
    const double shift = *std::max_element(log_scores.begin(), log_scores.end());
    std::vector<double> scores(log_scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k)
      scores[k] = std::isfinite(shift) ? std::exp(log_scores[k] - shift) : 0.0;

    auto [probs, rank] = normalize_candidate_scores(scores, 0);
    rep.truth_probability[i] = probs[0];
    rep.truth_rank[i] = rank;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] == probs[0]) tie[i] = 1;
    if (opts.store_probabilities) rep.probabilities[i] = std::move(probs);
  });
  if (std::find(degenerate.begin(), degenerate.end(), std::uint8_t{1}) != degenerate.end())
    throw std::invalid_argument(
        "attribute risk: degenerate income range, not enough distinct alternative values");
  rep.tie_flag = std::find(tie.begin(), tie.end(), std::uint8_t{1}) != tie.end();
  return rep;
}

RiskReport risk_report(const tabular::Dataset& original,
                       const std::vector<const synth::SynthesisResult*>& fitted,
                       const MatchConfig& cfg, const AttributeRiskOptions& attr_opts) {
  if (fitted.empty()) throw std::invalid_argument("risk_report: no releases");
  cfg.validate(original);
  for (const auto* f : fitted)
    if (f->release.n() != original.n())
      throw std::invalid_argument("risk_report: release not aligned to original");

  // one seeded selection shared by all methods, so identical releases
  // produce identical reports
  const std::size_t m0 = fitted[0]->release.m();
  RngStream pick(attr_opts.seed, "risk/select-vector");
  const std::size_t selected = pick.uniform_below(m0);

  RiskReport rep;
  for (const auto* f : fitted) {
    const auto& release = f->release;
    const std::size_t m = release.m();
    MethodRisk mr;
    mr.method = synth::method_name(release.method);
    mr.selected_vector = static_cast<int>(selected < m ? selected : m - 1);

    mr.e_per_vector.resize(m);
    mr.t_per_vector.resize(m);
    mr.f_per_vector.resize(m);
    mr.s_per_vector.resize(m);
    std::vector<IdentificationRiskReport> per_vec(m);
    // parallel across vectors; each match set is independent
    parallel_for(m, cfg.n_threads, [&](std::size_t ell) {
      MatchConfig serial_cfg = cfg;
      serial_cfg.n_threads = 1;
      per_vec[ell] = identification_risk(
          match_records(original, release.vectors[ell], serial_cfg));
    });
    for (std::size_t ell = 0; ell < m; ++ell) {
      mr.e_per_vector[ell] = per_vec[ell].expected_match_risk;
      mr.t_per_vector[ell] = per_vec[ell].true_match_rate;
      mr.f_per_vector[ell] = per_vec[ell].false_match_rate;
      mr.s_per_vector[ell] = per_vec[ell].unique_matches;
    }
    mr.e_mean = mean(mr.e_per_vector);
    mr.t_mean = mean(mr.t_per_vector);
    mr.f_mean = mean(mr.f_per_vector);
    mr.identification = std::move(per_vec[static_cast<std::size_t>(mr.selected_vector)]);

    mr.attribute = attribute_probabilities(original, *f, attr_opts);
    rep.methods.push_back(std::move(mr));
  }
  return rep;
}

nlohmann::json risk_report_json(const RiskReport& rep) {
  nlohmann::json j;
  j["methods"] = nlohmann::json::array();
  for (const auto& mr : rep.methods) {
    nlohmann::json mj;
    mj["method"] = mr.method;
    mj["selected_vector"] = mr.selected_vector;
    mj["identification"] = {
        {"expected_match_risk_mean", mr.e_mean},
        {"true_match_rate_mean", mr.t_mean},
        {"false_match_rate_mean", mr.f_mean},
        {"e_per_vector", mr.e_per_vector},
        {"t_per_vector", mr.t_per_vector},
        {"f_per_vector", mr.f_per_vector},
        {"s_per_vector", mr.s_per_vector},
        {"selected_vector_detail",
         {{"expected_match_risk", mr.identification.expected_match_risk},
          {"true_match_rate", mr.identification.true_match_rate},
          {"false_match_rate", mr.identification.false_match_rate},
          {"unique_matches", mr.identification.unique_matches},
          {"no_unique_flag", mr.identification.no_unique_flag}}}};
    nlohmann::json per_record = nlohmann::json::array();
    for (const auto& r : mr.identification.per_record)
      per_record.push_back({{"c", r.c}, {"t", r.t}, {"k", r.k}, {"f", r.f}});
    mj["identification"]["per_record"] = std::move(per_record);
    mj["attribute"] = {{"candidates", mr.attribute.candidates},
                       {"bin_width", mr.attribute.bin_width},
                       {"tie_flag", mr.attribute.tie_flag},
                       {"mean_truth_probability", mean(mr.attribute.truth_probability)},
                       {"truth_probability", mr.attribute.truth_probability},
                       {"truth_rank", mr.attribute.truth_rank}};
    j["methods"].push_back(std::move(mj));
  }
  return j;
}

}  // namespace synthgate::risk
