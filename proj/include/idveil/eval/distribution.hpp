#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "idveil/core/embedding.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

struct AttributeDrift {
  int attribute = 0;
  double before_rate = 0.0;
  double after_rate = 0.0;
  double drift = 0.0;
};

// Per-attribute positive rates before and after anonymization. The positive
// rate counts samples whose soft score clears the decision threshold; drift
// is the absolute rate change, so it is symmetric in the two sides.
struct AttributeDistributionReport {
  std::vector<AttributeDrift> rows;
  double theta = 0.5;

  Csv to_csv() const {
    Csv csv({"attribute", "before_rate", "after_rate", "drift"});
    for (const AttributeDrift& r : rows) {
      csv.add_row({csv_num(r.attribute), csv_num(r.before_rate), csv_num(r.after_rate),
                   csv_num(r.drift)});
    }
    return csv;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const AttributeDrift& r : rows) {
      out.push_back({{"attribute", r.attribute},
                     {"before_rate", r.before_rate},
                     {"after_rate", r.after_rate},
                     {"drift", r.drift}});
    }
    return {{"theta", theta}, {"attributes", out}};
  }
};

inline AttributeDistributionReport attribute_distribution(
    const std::vector<AttributeVector>& before, const std::vector<AttributeVector>& after,
    const std::vector<int>& attributes, double theta = 0.5) {
  if (before.empty() || before.size() != after.size()) {
    throw std::invalid_argument("attribute_distribution: sample counts must match and be nonzero");
  }
  AttributeDistributionReport report;
  report.theta = theta;
  for (int attr : attributes) {
    AttributeDrift row;
    row.attribute = attr;
    int before_hits = 0, after_hits = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (attr < 0 || attr >= static_cast<int>(before[i].values.size()) ||
          attr >= static_cast<int>(after[i].values.size())) {
        throw std::invalid_argument("attribute_distribution: attribute index out of range");
      }
      if (before[i].values[attr] > theta) ++before_hits;
      if (after[i].values[attr] > theta) ++after_hits;
    }
    row.before_rate = static_cast<double>(before_hits) / before.size();
    row.after_rate = static_cast<double>(after_hits) / after.size();
    row.drift = std::fabs(row.before_rate - row.after_rate);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace idveil
