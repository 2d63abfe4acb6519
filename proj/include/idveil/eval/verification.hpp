#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "idveil/metrics/disent.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// A pair of embeddings compared under the verification protocol. Genuine
// pairs picture the same person, impostor pairs picture different people.
struct EmbeddingPair {
  IdentityEmbedding a;
  IdentityEmbedding b;
};

// Distance-threshold sweep over a verification experiment. A pair is accepted
// as "same person" when its distance is at or below the threshold, so the
// curve runs from (0,0) to (1,1) as the threshold grows.
struct ROCCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
  double best_threshold = 0.0;
  double best_accuracy = 0.0;

  Csv to_csv() const {
    Csv csv({"threshold", "fpr", "tpr"});
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      csv.add_row({csv_num(thresholds[i]), csv_num(fpr[i]), csv_num(tpr[i])});
    }
    return csv;
  }

  nlohmann::ordered_json to_json() const {
    return {{"auc", auc},
            {"best_threshold", best_threshold},
            {"best_accuracy", best_accuracy},
            {"points", thresholds.size()}};
  }
};

// Builds the ROC curve from genuine and impostor distance samples. The
// threshold grid is the set of distinct observed distances, which makes the
// trapezoidal AUC equal the exhaustive comparison probability
// P(genuine < impostor) + P(tie)/2. Accuracy is the best single-threshold
// accuracy over the sweep, with an all-reject candidate below the smallest
// distance; the smallest threshold wins ties.
inline ROCCurve verification_roc(const std::vector<double>& genuine,
                                 const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw std::invalid_argument("verification_roc: empty pair set");
  }
  for (double d : genuine) {
    if (!std::isfinite(d)) throw std::invalid_argument("verification_roc: non-finite distance");
  }
  for (double d : impostor) {
    if (!std::isfinite(d)) throw std::invalid_argument("verification_roc: non-finite distance");
  }

  std::vector<double> g = genuine, im = impostor;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());

  std::vector<double> grid;
  grid.reserve(g.size() + im.size() + 1);
  grid.push_back(std::min(g.front(), im.front()) - 1.0);
  std::merge(g.begin(), g.end(), im.begin(), im.end(), std::back_inserter(grid));
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  ROCCurve roc;
  roc.thresholds = grid;
  roc.fpr.reserve(grid.size());
  roc.tpr.reserve(grid.size());
  const double ng = static_cast<double>(g.size());
  const double ni = static_cast<double>(im.size());
  std::size_t gi = 0, ii = 0;
  double best_acc = -1.0;
  for (double t : grid) {
    while (gi < g.size() && g[gi] <= t) ++gi;
    while (ii < im.size() && im[ii] <= t) ++ii;
    const double tpr = gi / ng;
    const double fpr = ii / ni;
    roc.tpr.push_back(tpr);
    roc.fpr.push_back(fpr);
    const double acc = (gi + (im.size() - ii)) / (ng + ni);
    if (acc > best_acc) {
      best_acc = acc;
      roc.best_threshold = t;
    }
  }
  roc.best_accuracy = best_acc;

  double auc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    auc += (roc.fpr[i] - roc.fpr[i - 1]) * (roc.tpr[i] + roc.tpr[i - 1]) / 2.0;
  }
  roc.auc = auc;
  return roc;
}

inline ROCCurve verification_roc(const std::vector<EmbeddingPair>& genuine,
                                 const std::vector<EmbeddingPair>& impostor) {
  std::vector<double> g, im;
  g.reserve(genuine.size());
  im.reserve(impostor.size());
  for (const EmbeddingPair& p : genuine) g.push_back(identity_distance(p.a, p.b));
  for (const EmbeddingPair& p : impostor) im.push_back(identity_distance(p.a, p.b));
  return verification_roc(g, im);
}

}  // namespace idveil
