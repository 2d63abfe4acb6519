#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "idveil/search/scoring.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// Disentanglement score of one consecutive layer window [start, start+length).
struct WindowScore {
  int start = 0;
  int length = 0;
  double mean_ia = 0.0;
  double mean_id = 0.0;    // raw identity distance, unnormalized
  double mean_attr = 0.0;  // raw attribute distance, unnormalized
};

struct LayerSearchResult {
  std::vector<WindowScore> table;  // ordered by (length, start)
  WindowScore best_consecutive;    // highest mean_ia; ties go to shorter, then earlier
  // Layers ranked by their single-layer window score, best first.
  std::vector<std::pair<int, double>> top_individual;
  NormalizationStats id_stats, attr_stats;
  int pairs = 0;
  bool symmetric = true;

  Csv to_csv() const {
    Csv csv({"i", "m", "score"});
    for (const auto& w : table) csv.add_row({csv_num(w.start), csv_num(w.length), csv_num(w.mean_ia)});
    return csv;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["pairs"] = pairs;
    j["symmetric"] = symmetric;
    j["best"] = {{"start", best_consecutive.start},
                 {"length", best_consecutive.length},
                 {"score", best_consecutive.mean_ia}};
    auto& rows = j["windows"] = nlohmann::ordered_json::array();
    for (const auto& w : table) {
      rows.push_back({{"i", w.start},
                      {"m", w.length},
                      {"score", w.mean_ia},
                      {"id_distance", w.mean_id},
                      {"attr_distance", w.mean_attr}});
    }
    auto& top = j["top_individual"] = nlohmann::ordered_json::array();
    for (const auto& [layer, score] : top_individual) {
      top.push_back({{"layer", layer}, {"score", score}});
    }
    return j;
  }
};

// Scores every consecutive window (i, m) for the requested window lengths by
// swapping the window between pair latents and measuring how far identity
// moves relative to attributes.
inline LayerSearchResult layer_window_search(const std::vector<LatentCode>& sources,
                                             const std::vector<LatentCode>& targets,
                                             const std::vector<int>& window_lengths,
                                             const Backend& backend,
                                             const SearchOptions& opt = {}) {
  opt.metric.validate();
  const int n_layers = backend.shape().n_layers;
  std::vector<int> lengths = window_lengths;
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  if (lengths.empty()) throw std::invalid_argument("layer search: no window lengths given");
  for (int m : lengths) {
    if (m < 1 || m > n_layers) {
      throw std::invalid_argument("layer search: window length " + std::to_string(m) +
                                  " outside [1, " + std::to_string(n_layers) + "]");
    }
  }
  const auto dirs = detail::build_directions(sources, targets, backend, opt);

  std::vector<WindowScore> windows;
  for (int m : lengths) {
    for (int i = 0; i + m <= n_layers; ++i) windows.push_back({i, m, 0.0, 0.0, 0.0});
  }
  const auto samples = detail::score_candidates(
      dirs, windows.size(), backend, opt,
      [&](const Backend& b, std::size_t cand, const detail::PairDirection& d) {
        const auto layers = LayerSet::consecutive(windows[cand].start, windows[cand].length);
        return b.generate(swap_layers(*d.from, *d.into, layers));
      });
  const auto pooled =
      detail::pool_and_score(samples, windows.size(), dirs.size(), opt.metric, "layer search");
  for (std::size_t c = 0; c < windows.size(); ++c) {
    windows[c].mean_ia = pooled.mean_ia[c];
    windows[c].mean_id = pooled.mean_id[c];
    windows[c].mean_attr = pooled.mean_attr[c];
  }

  LayerSearchResult result;
  result.table = std::move(windows);
  result.id_stats = pooled.id_stats;
  result.attr_stats = pooled.attr_stats;
  result.pairs = static_cast<int>(sources.size());
  result.symmetric = opt.symmetric;
  result.best_consecutive = result.table.front();
  for (const auto& w : result.table) {
    if (w.mean_ia > result.best_consecutive.mean_ia) result.best_consecutive = w;
  }
  for (const auto& w : result.table) {
    if (w.length == 1) result.top_individual.emplace_back(w.start, w.mean_ia);
  }
  std::stable_sort(result.top_individual.begin(), result.top_individual.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return result;
}

// Forward greedy selection of k individual layers: at every step adds the
// layer whose inclusion gives the highest pooled ia score of the grown set.
struct GreedyLayerStep {
  int layer = 0;
  double score = 0.0;  // ia of the set after adding this layer
};

struct GreedyLayerResult {
  LayerSet selected;
  std::vector<GreedyLayerStep> steps;
  int pairs = 0;
  bool symmetric = true;

  Csv to_csv() const {
    Csv csv({"step", "layer", "score"});
    for (std::size_t i = 0; i < steps.size(); ++i) {
      csv.add_row({csv_num(i + 1), csv_num(steps[i].layer), csv_num(steps[i].score)});
    }
    return csv;
  }
};

inline GreedyLayerResult greedy_layer_select(const std::vector<LatentCode>& sources,
                                             const std::vector<LatentCode>& targets, int k,
                                             const Backend& backend,
                                             const SearchOptions& opt = {}) {
  opt.metric.validate();
  const int n_layers = backend.shape().n_layers;
  if (k < 1 || k > n_layers) throw std::invalid_argument("greedy layer select: bad k");
  const auto dirs = detail::build_directions(sources, targets, backend, opt);

  GreedyLayerResult result;
  result.pairs = static_cast<int>(sources.size());
  result.symmetric = opt.symmetric;
  std::vector<int> chosen;
  for (int step = 0; step < k; ++step) {
    std::vector<std::vector<int>> candidates;  // chosen + one new layer each
    std::vector<int> additions;
    for (int layer = 0; layer < n_layers; ++layer) {
      if (std::find(chosen.begin(), chosen.end(), layer) != chosen.end()) continue;
      auto grown = chosen;
      grown.push_back(layer);
      candidates.push_back(std::move(grown));
      additions.push_back(layer);
    }
    const auto samples = detail::score_candidates(
        dirs, candidates.size(), backend, opt,
        [&](const Backend& b, std::size_t cand, const detail::PairDirection& d) {
          return b.generate(swap_layers(*d.from, *d.into, LayerSet(candidates[cand])));
        });
    const auto pooled = detail::pool_and_score(samples, candidates.size(), dirs.size(),
                                               opt.metric, "greedy layer step");
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
      if (pooled.mean_ia[c] > pooled.mean_ia[best]) best = c;
    }
    chosen.push_back(additions[best]);
    result.steps.push_back({additions[best], pooled.mean_ia[best]});
  }
  result.selected = LayerSet(chosen);
  return result;
}

}  // namespace idveil
