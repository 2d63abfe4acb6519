#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "idveil/core/embedding.hpp"
#include "idveil/core/errors.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// Metric parameters shared across the toolkit. alpha and beta weight the
// identity and attribute terms of the disentanglement score; gamma is the
// privacy threshold, theta the attribute decision threshold.
struct MetricConfig {
  double alpha = 1.0;
  double beta = 1.25;
  bool attr_logit = false;
  double gamma = 0.9;
  double theta = 0.5;

  void validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
      throw ConfigError("metric config: alpha and beta must be positive");
    }
  }
};

// Euclidean distance between identity embeddings. Refuses to compare
// embeddings produced under different normalization conventions.
inline double identity_distance(const IdentityEmbedding& a, const IdentityEmbedding& b) {
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("identity_distance: dimension mismatch");
  }
  if (a.normalized != b.normalized) {
    throw std::invalid_argument("identity_distance: mixed normalization conventions");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double logit(double x) {
  if (!(x > 0.0 && x < 1.0)) {
    throw std::invalid_argument("logit: value outside (0, 1)");
  }
  return std::log(x / (1.0 - x));
}

// Euclidean distance between attribute vectors, optionally after an
// elementwise logit transform (off by default).
inline double attribute_distance(const AttributeVector& a, const AttributeVector& b,
                                 bool logit_transform = false) {
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("attribute_distance: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = logit_transform ? logit(a.values[i]) : a.values[i];
    const double y = logit_transform ? logit(b.values[i]) : b.values[i];
    s += (x - y) * (x - y);
  }
  return std::sqrt(s);
}

// Min and max of one metric over an experiment's candidate population.
struct NormalizationStats {
  double min_value = 0.0;
  double max_value = 0.0;
  std::string population;

  bool degenerate() const { return !(max_value > min_value); }

  static NormalizationStats from(const std::vector<double>& values, std::string population) {
    if (values.empty()) {
      throw std::invalid_argument("NormalizationStats: empty population '" + population + "'");
    }
    NormalizationStats s;
    s.min_value = *std::min_element(values.begin(), values.end());
    s.max_value = *std::max_element(values.begin(), values.end());
    s.population = std::move(population);
    return s;
  }
};

// Min-max rescaling into [0, 1], clamped. A degenerate population (min equal
// to max) maps everything to 0.
inline double minmax_normalize(double value, const NormalizationStats& stats) {
  if (stats.degenerate()) return 0.0;
  const double h = (value - stats.min_value) / (stats.max_value - stats.min_value);
  return std::clamp(h, 0.0, 1.0);
}

// One candidate's identity disentanglement score and its ingredients.
struct DisentanglementScore {
  double raw_id = 0.0;
  double raw_attr = 0.0;
  double h_id = 0.0;
  double h_attr = 0.0;
  double alpha = 1.0;
  double beta = 1.25;
  double ia = 0.0;
};

inline DisentanglementScore ia_score(double raw_id, double raw_attr,
                                     const NormalizationStats& id_stats,
                                     const NormalizationStats& attr_stats,
                                     double alpha = 1.0, double beta = 1.25) {
  DisentanglementScore s;
  s.raw_id = raw_id;
  s.raw_attr = raw_attr;
  s.h_id = minmax_normalize(raw_id, id_stats);
  s.h_attr = minmax_normalize(raw_attr, attr_stats);
  s.alpha = alpha;
  s.beta = beta;
  s.ia = alpha * s.h_id - beta * s.h_attr;
  return s;
}

// Privacy summary over a set of source/output identity distances. `strict`
// holds when every pair clears the threshold.
struct PrivacyReport {
  double mean_distance = 0.0;
  double threshold = 0.9;
  double fraction_above = 0.0;
  bool strict = false;
  std::size_t pairs = 0;

  nlohmann::ordered_json to_json() const {
    return {{"metric", "privacy"},
            {"mean_identity_distance", mean_distance},
            {"threshold", threshold},
            {"fraction_above_threshold", fraction_above},
            {"strict", strict},
            {"pairs", pairs}};
  }

  Csv to_csv() const {
    Csv csv({"metric", "mean_identity_distance", "threshold", "fraction_above_threshold",
             "strict", "pairs"});
    csv.add_row({"privacy", csv_num(mean_distance), csv_num(threshold), csv_num(fraction_above),
                 strict ? "true" : "false", csv_num(pairs)});
    return csv;
  }
};

inline PrivacyReport privacy_metric(const std::vector<double>& distances, double gamma = 0.9) {
  if (distances.empty()) {
    throw std::invalid_argument("privacy_metric: no distances");
  }
  PrivacyReport r;
  r.threshold = gamma;
  r.pairs = distances.size();
  std::size_t above = 0;
  double sum = 0.0;
  for (double d : distances) {
    if (d < 0.0 || !std::isfinite(d)) {
      throw std::invalid_argument("privacy_metric: distances must be finite and nonnegative");
    }
    sum += d;
    if (d > gamma) ++above;
  }
  r.mean_distance = sum / static_cast<double>(distances.size());
  r.fraction_above = static_cast<double>(above) / static_cast<double>(distances.size());
  r.strict = (above == distances.size());
  return r;
}

// Utility summary over attribute changes. The per-attribute pass flag checks
// that the binary decision against theta is preserved from source to output
// on every pair; `agreement` is the fraction of pairs where it is.
struct UtilityReport {
  double mean_distance = 0.0;
  double theta = 0.5;
  std::size_t pairs = 0;
  std::vector<double> agreement;
  std::vector<bool> pass;

  bool all_pass() const {
    return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"metric", "utility"},
                             {"mean_attribute_distance", mean_distance},
                             {"theta", theta},
                             {"pairs", pairs}};
    if (!agreement.empty()) {
      j["per_attribute_agreement"] = agreement;
      j["per_attribute_pass"] = pass;
      j["all_pass"] = all_pass();
    }
    return j;
  }

  Csv to_csv() const {
    Csv csv({"metric", "attribute", "value"});
    csv.add_row({"utility", "mean_distance", csv_num(mean_distance)});
    csv.add_row({"utility", "theta", csv_num(theta)});
    csv.add_row({"utility", "pairs", csv_num(pairs)});
    for (std::size_t j = 0; j < agreement.size(); ++j) {
      csv.add_row({"utility", "agreement_" + std::to_string(j), csv_num(agreement[j])});
    }
    return csv;
  }
};

// Distance-only form: mean attribute distance without pass flags.
inline UtilityReport utility_metric(const std::vector<double>& distances, double theta = 0.5) {
  if (distances.empty()) {
    throw std::invalid_argument("utility_metric: no distances");
  }
  UtilityReport r;
  r.theta = theta;
  r.pairs = distances.size();
  double sum = 0.0;
  for (double d : distances) {
    if (d < 0.0 || !std::isfinite(d)) {
      throw std::invalid_argument("utility_metric: distances must be finite and nonnegative");
    }
    sum += d;
  }
  r.mean_distance = sum / static_cast<double>(distances.size());
  return r;
}

// Vector form: computes distances and per-attribute decision agreement.
inline UtilityReport utility_metric(const std::vector<AttributeVector>& before,
                                    const std::vector<AttributeVector>& after,
                                    double theta = 0.5, bool logit_transform = false) {
  if (before.empty() || before.size() != after.size()) {
    throw std::invalid_argument("utility_metric: before/after size mismatch or empty");
  }
  const std::size_t m = before[0].values.size();
  std::vector<double> distances;
  distances.reserve(before.size());
  std::vector<std::size_t> agree(m, 0);
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].values.size() != m || after[i].values.size() != m) {
      throw std::invalid_argument("utility_metric: ragged attribute vectors");
    }
    distances.push_back(attribute_distance(before[i], after[i], logit_transform));
    for (std::size_t j = 0; j < m; ++j) {
      if ((before[i].values[j] > theta) == (after[i].values[j] > theta)) ++agree[j];
    }
  }
  UtilityReport r = utility_metric(distances, theta);
  r.agreement.resize(m);
  r.pass.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    r.agreement[j] = static_cast<double>(agree[j]) / static_cast<double>(before.size());
    r.pass[j] = (agree[j] == before.size());
  }
  return r;
}

}  // namespace idveil
