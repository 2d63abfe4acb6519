#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "idveil/metrics/disent.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

struct DiversityConfig {
  std::vector<int> k_grid;
  int original_count = 0;
  int max_iterations = 100;

  void validate() const {
    if (k_grid.empty()) throw std::invalid_argument("diversity: empty k grid");
    if (original_count <= 0) throw std::invalid_argument("diversity: original count must be positive");
  }
};

// Identity-count estimate for an anonymized set: k-means over the embedding
// cloud with k chosen by silhouette, the chosen k standing in for the number
// of distinct identities that survived.
struct DiversityReport {
  int count = 0;
  double ratio = 0.0;
  double capped_ratio = 0.0;
  double silhouette = 0.0;

  nlohmann::ordered_json to_json() const {
    return {{"identity_count", count},
            {"ratio", ratio},
            {"capped_ratio", capped_ratio},
            {"silhouette", silhouette}};
  }
};

namespace detail {

inline double embed_dist(const IdentityEmbedding& a, const IdentityEmbedding& b) {
  return identity_distance(a, b);
}

// Lloyd iterations with a farthest-point start. Everything runs on the
// value-sorted copy built by the caller, so the outcome cannot depend on the
// order the embeddings arrived in. All tie breaks go to the lower index.
inline std::vector<int> kmeans_assign(const std::vector<IdentityEmbedding>& pts, int k,
                                      int max_iterations) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> centers = {0};
  while (static_cast<int>(centers.size()) < k) {
    int far_idx = 0;
    double far_d = -1.0;
    for (int i = 0; i < n; ++i) {
      double d = embed_dist(pts[i], pts[centers[0]]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        d = std::min(d, embed_dist(pts[i], pts[centers[c]]));
      }
      if (d > far_d) {
        far_d = d;
        far_idx = i;
      }
    }
    centers.push_back(far_idx);
  }

  const std::size_t dim = pts[0].values.size();
  std::vector<IdentityEmbedding> means(k);
  for (int c = 0; c < k; ++c) means[c] = pts[centers[c]];

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = embed_dist(pts[i], means[0]);
      for (int c = 1; c < k; ++c) {
        const double d = embed_dist(pts[i], means[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    for (int c = 0; c < k; ++c) {
      std::vector<double> sum(dim, 0.0);
      int members = 0;
      for (int i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        for (std::size_t d = 0; d < dim; ++d) sum[d] += pts[i].values[d];
        ++members;
      }
      if (members == 0) {
        // Revive an empty cluster at the point farthest from its mean.
        int far_idx = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = embed_dist(pts[i], means[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far_idx = i;
          }
        }
        means[c] = pts[far_idx];
      } else {
        for (std::size_t d = 0; d < dim; ++d) means[c].values[d] = sum[d] / members;
      }
    }
  }
  return assign;
}

inline double mean_silhouette(const std::vector<IdentityEmbedding>& pts,
                              const std::vector<int>& assign, int k) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> sizes(k, 0);
  for (int a : assign) ++sizes[a];

  std::vector<double> scores(n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> dist_sum(k, 0.0);
    for (int j = 0; j < n; ++j) {
      if (j != i) dist_sum[assign[j]] += embed_dist(pts[i], pts[j]);
    }
    const int own = assign[i];
    if (sizes[own] <= 1) continue;  // singleton clusters score zero
    const double a = dist_sum[own] / (sizes[own] - 1);
    double b = -1.0;
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      const double m = dist_sum[c] / sizes[c];
      if (b < 0.0 || m < b) b = m;
    }
    const double denom = std::max(a, b);
    scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  std::sort(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / n;
}

}  // namespace detail

inline DiversityReport identity_diversity(std::vector<IdentityEmbedding> embeddings,
                                          const DiversityConfig& cfg) {
  cfg.validate();
  if (embeddings.size() < 2) {
    throw std::invalid_argument("identity_diversity: need at least two embeddings");
  }
  for (const IdentityEmbedding& e : embeddings) {
    if (e.values.size() != embeddings[0].values.size() ||
        e.normalized != embeddings[0].normalized) {
      throw std::invalid_argument("identity_diversity: mixed embedding spaces");
    }
  }

  // Sorting by value first makes the whole computation independent of input
  // order, including floating-point summation order.
  std::sort(embeddings.begin(), embeddings.end(),
            [](const IdentityEmbedding& a, const IdentityEmbedding& b) {
              return a.values < b.values;
            });

  DiversityReport report;
  const bool degenerate =
      embeddings.front().values == embeddings.back().values &&
      std::all_of(embeddings.begin(), embeddings.end(), [&](const IdentityEmbedding& e) {
        return e.values == embeddings.front().values;
      });
  if (degenerate) {
    report.count = 1;
    report.silhouette = 0.0;
  } else {
    std::vector<int> grid = cfg.k_grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    int best_k = 0;
    double best_s = 0.0;
    for (int k : grid) {
      if (k < 2 || k >= static_cast<int>(embeddings.size())) continue;
      const std::vector<int> assign = detail::kmeans_assign(embeddings, k, cfg.max_iterations);
      const double s = detail::mean_silhouette(embeddings, assign, k);
      if (best_k == 0 || s > best_s) {
        best_k = k;
        best_s = s;
      }
    }
    if (best_k == 0) {
      throw std::invalid_argument("identity_diversity: no usable k in grid");
    }
    report.count = best_k;
    report.silhouette = best_s;
  }
  report.ratio = static_cast<double>(report.count) / cfg.original_count;
  report.capped_ratio = std::min(1.0, report.ratio);
  return report;
}

}  // namespace idveil
