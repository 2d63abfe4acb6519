#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idveil/metrics/disent.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

struct LabeledEmbedding {
  std::string label;
  IdentityEmbedding embed;
};

// Identification-rank experiment. Each probe is ranked against the gallery
// identities by distance; a probe ranks k when k-1 other identities sit
// closer than its true identity. Tied identities share the average of the
// positions they span, so a probe equidistant to all G identities ranks
// (G+1)/2.
struct RankReport {
  std::vector<double> ranks;
  double mean = 0.0;
  double stddev = 0.0;
  int gallery_identities = 0;

  Csv to_csv() const {
    Csv csv({"probe", "rank"});
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      csv.add_row({csv_num(i), csv_num(ranks[i])});
    }
    return csv;
  }

  nlohmann::ordered_json to_json() const {
    return {{"mean_rank", mean},
            {"stddev", stddev},
            {"probes", ranks.size()},
            {"gallery_identities", gallery_identities}};
  }
};

// Ranks every probe's true identity within the gallery. An identity with
// several gallery images scores by its closest one. The standard deviation
// is the population spread over the probe set.
inline RankReport identification_rank(const std::vector<LabeledEmbedding>& gallery,
                                      const std::vector<LabeledEmbedding>& probes) {
  if (gallery.empty() || probes.empty()) {
    throw std::invalid_argument("identification_rank: empty gallery or probe set");
  }
  std::map<std::string, std::vector<const IdentityEmbedding*>> by_identity;
  for (const LabeledEmbedding& e : gallery) by_identity[e.label].push_back(&e.embed);

  RankReport report;
  report.gallery_identities = static_cast<int>(by_identity.size());
  report.ranks.reserve(probes.size());
  for (const LabeledEmbedding& probe : probes) {
    if (!by_identity.count(probe.label)) {
      throw std::invalid_argument("identification_rank: probe identity '" + probe.label +
                                  "' absent from gallery");
    }
    double d_true = 0.0;
    std::vector<double> distances;
    distances.reserve(by_identity.size());
    for (const auto& [label, embeds] : by_identity) {
      double d = identity_distance(probe.embed, *embeds.front());
      for (std::size_t i = 1; i < embeds.size(); ++i) {
        d = std::min(d, identity_distance(probe.embed, *embeds[i]));
      }
      distances.push_back(d);
      if (label == probe.label) d_true = d;
    }
    std::size_t below = 0, tied = 0;
    for (double d : distances) {
      if (d < d_true) ++below;
      if (d == d_true) ++tied;
    }
    report.ranks.push_back(below + (tied + 1) / 2.0);
  }

  double sum = 0.0;
  for (double r : report.ranks) sum += r;
  report.mean = sum / report.ranks.size();
  double var = 0.0;
  for (double r : report.ranks) var += (r - report.mean) * (r - report.mean);
  report.stddev = std::sqrt(var / report.ranks.size());
  return report;
}

}  // namespace idveil
