#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idveil/util/csv.hpp"

namespace idveil {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

// Metrics one anonymization method scored on a common benchmark. The maps
// are keyed by embedder name so several recognition models can sit side by
// side, mirroring the usual comparison-table layout.
struct MethodMetrics {
  std::map<std::string, MeanStd> identity_distance;
  std::map<std::string, double> auc;
  std::map<std::string, double> accuracy;
  std::optional<MeanStd> rank;
};

struct MethodEntry {
  std::string name;
  MethodMetrics metrics;
};

struct ComparisonTables {
  Csv distance = Csv({"method", "embedder", "mean", "std"});
  Csv auc = Csv({"method", "embedder", "auc"});
  Csv accuracy = Csv({"method", "embedder", "accuracy"});
  Csv rank = Csv({"method", "rank_mean", "rank_std"});

  nlohmann::ordered_json to_json() const {
    auto table = [](const Csv& csv) {
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const auto& r : csv.rows()) {
        nlohmann::ordered_json row = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < r.size(); ++i) row[csv.header()[i]] = r[i];
        rows.push_back(row);
      }
      return rows;
    };
    return {{"identity_distance", table(distance)},
            {"auc", table(auc)},
            {"accuracy", table(accuracy)},
            {"rank", table(rank)}};
  }
};

namespace detail {

template <typename Map>
std::vector<std::string> metric_keys(const Map& m) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : m) keys.push_back(k);
  return keys;
}

}  // namespace detail

// Lays every method's metrics out as comparison tables. All methods must
// report the same embedder set for each metric family they use, and either
// all or none may carry a rank entry.
inline ComparisonTables compare_methods(const std::vector<MethodEntry>& methods) {
  if (methods.empty()) {
    throw std::invalid_argument("compare_methods: no methods given");
  }
  const auto dist_keys = detail::metric_keys(methods.front().metrics.identity_distance);
  const auto auc_keys = detail::metric_keys(methods.front().metrics.auc);
  const auto acc_keys = detail::metric_keys(methods.front().metrics.accuracy);
  const bool has_rank = methods.front().metrics.rank.has_value();
  for (const MethodEntry& m : methods) {
    if (detail::metric_keys(m.metrics.identity_distance) != dist_keys ||
        detail::metric_keys(m.metrics.auc) != auc_keys ||
        detail::metric_keys(m.metrics.accuracy) != acc_keys ||
        m.metrics.rank.has_value() != has_rank) {
      throw std::invalid_argument("compare_methods: method '" + m.name +
                                  "' reports a different metric set");
    }
  }

  ComparisonTables tables;
  for (const MethodEntry& m : methods) {
    for (const auto& [embedder, ms] : m.metrics.identity_distance) {
      tables.distance.add_row({m.name, embedder, csv_num(ms.mean), csv_num(ms.stddev)});
    }
    for (const auto& [embedder, v] : m.metrics.auc) {
      tables.auc.add_row({m.name, embedder, csv_num(v)});
    }
    for (const auto& [embedder, v] : m.metrics.accuracy) {
      tables.accuracy.add_row({m.name, embedder, csv_num(v)});
    }
    if (m.metrics.rank) {
      tables.rank.add_row({m.name, csv_num(m.metrics.rank->mean), csv_num(m.metrics.rank->stddev)});
    }
  }
  return tables;
}

// Published full-scale measurements for the latent-swap approach, kept as
// data so desk-scale runs can show them alongside their own numbers. They
// are reference points, not pass criteria.
inline MethodEntry full_scale_reference() {
  MethodEntry entry;
  entry.name = "latent-swap-reference";
  entry.metrics.identity_distance = {{"ArcFace", {1.35, 0.11}},
                                     {"CurricularFace", {1.29, 0.08}},
                                     {"FaceNet", {1.18, 0.08}}};
  entry.metrics.auc = {{"ArcFace", 0.7127}, {"CurricularFace", 0.6805}, {"FaceNet", 0.6011}};
  return entry;
}

}  // namespace idveil
