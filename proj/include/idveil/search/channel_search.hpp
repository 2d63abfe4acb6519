#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idveil/search/scoring.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// Score of one channel block swap within a single layer.
struct BlockScore {
  ChannelBlock block;
  double mean_ia = 0.0;
  double mean_id = 0.0;
  double mean_attr = 0.0;
  // mean_ia divided by block length. Tail blocks shorter than the scan's
  // block size would otherwise look weak purely for covering fewer channels.
  double per_channel = 0.0;
};

struct ChannelScoreTable {
  int block_size = 0;
  std::vector<int> layers;          // scanned layers, ascending
  std::vector<BlockScore> blocks;   // (layer, start) ascending
  std::vector<BlockScore> smoothed; // same scan re-grouped to 16-channel resolution
  NormalizationStats id_stats, attr_stats;
  int pairs = 0;
  bool symmetric = true;

  Csv to_csv() const {
    Csv csv({"layer", "block_start", "score"});
    for (const auto& b : blocks) {
      csv.add_row({csv_num(b.block.layer), csv_num(b.block.start), csv_num(b.mean_ia)});
    }
    return csv;
  }

  Csv smoothed_csv() const {
    Csv csv({"layer", "block_start", "score"});
    for (const auto& b : smoothed) {
      csv.add_row({csv_num(b.block.layer), csv_num(b.block.start), csv_num(b.mean_ia)});
    }
    return csv;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["block_size"] = block_size;
    j["layers"] = layers;
    j["pairs"] = pairs;
    j["symmetric"] = symmetric;
    auto& rows = j["blocks"] = nlohmann::ordered_json::array();
    for (const auto& b : blocks) {
      rows.push_back({{"layer", b.block.layer},
                      {"start", b.block.start},
                      {"length", b.block.length},
                      {"score", b.mean_ia},
                      {"per_channel", b.per_channel},
                      {"id_distance", b.mean_id},
                      {"attr_distance", b.mean_attr}});
    }
    return j;
  }
};

// Scans the given layers in consecutive blocks of block_size channels. A tail
// shorter than block_size is scored as its own block.
inline ChannelScoreTable channel_score_scan(const std::vector<LatentCode>& sources,
                                            const std::vector<LatentCode>& targets,
                                            const std::vector<int>& layers, int block_size,
                                            const Backend& backend,
                                            const SearchOptions& opt = {}) {
  opt.metric.validate();
  const ShapeDescriptor shape = backend.shape();
  if (block_size < 1 || block_size > shape.n_channels) {
    throw std::invalid_argument("channel scan: block size outside [1, n_channels]");
  }
  std::vector<int> scan_layers = layers;
  std::sort(scan_layers.begin(), scan_layers.end());
  scan_layers.erase(std::unique(scan_layers.begin(), scan_layers.end()), scan_layers.end());
  if (scan_layers.empty()) throw std::invalid_argument("channel scan: no layers given");
  for (int l : scan_layers) {
    if (l < 0 || l >= shape.n_layers) throw std::invalid_argument("channel scan: layer out of range");
  }
  const auto dirs = detail::build_directions(sources, targets, backend, opt);

  ChannelScoreTable table;
  table.block_size = block_size;
  table.layers = scan_layers;
  table.pairs = static_cast<int>(sources.size());
  table.symmetric = opt.symmetric;
  for (int l : scan_layers) {
    for (int start = 0; start < shape.n_channels; start += block_size) {
      const int len = std::min(block_size, shape.n_channels - start);
      table.blocks.push_back({ChannelBlock{l, start, len}, 0.0, 0.0, 0.0, 0.0});
    }
  }
  const auto samples = detail::score_candidates(
      dirs, table.blocks.size(), backend, opt,
      [&](const Backend& b, std::size_t cand, const detail::PairDirection& d) {
        const ChannelBlockSet one({table.blocks[cand].block});
        return b.generate(swap_channels(*d.from, *d.into, one));
      });
  const auto pooled =
      detail::pool_and_score(samples, table.blocks.size(), dirs.size(), opt.metric, "channel scan");
  for (std::size_t c = 0; c < table.blocks.size(); ++c) {
    BlockScore& b = table.blocks[c];
    b.mean_ia = pooled.mean_ia[c];
    b.mean_id = pooled.mean_id[c];
    b.mean_attr = pooled.mean_attr[c];
    b.per_channel = b.mean_ia / static_cast<double>(b.block.length);
  }
  table.id_stats = pooled.id_stats;
  table.attr_stats = pooled.attr_stats;

  // 16-channel smoothing: averages the fine-grained block scores that fall in
  // each 16-wide span. Scans at block_size >= 16 are already that coarse, so
  // the smoothed view just mirrors the scan.
  constexpr int kSmoothSpan = 16;
  if (block_size >= kSmoothSpan) {
    table.smoothed = table.blocks;
  } else {
    std::size_t i = 0;
    while (i < table.blocks.size()) {
      const int layer = table.blocks[i].block.layer;
      const int span_start = (table.blocks[i].block.start / kSmoothSpan) * kSmoothSpan;
      BlockScore group{ChannelBlock{layer, span_start, 0}, 0.0, 0.0, 0.0, 0.0};
      int members = 0;
      while (i < table.blocks.size() && table.blocks[i].block.layer == layer &&
             table.blocks[i].block.start < span_start + kSmoothSpan) {
        const BlockScore& b = table.blocks[i];
        group.block.length += b.block.length;
        group.mean_ia += b.mean_ia;
        group.mean_id += b.mean_id;
        group.mean_attr += b.mean_attr;
        ++members;
        ++i;
      }
      group.mean_ia /= members;
      group.mean_id /= members;
      group.mean_attr /= members;
      group.per_channel = group.mean_ia / static_cast<double>(group.block.length);
      table.smoothed.push_back(group);
    }
  }
  return table;
}

// One accepted block of a greedy channel-budget selection.
struct GreedyPick {
  int index = 0;  // position in the ranked order, 1-based
  ChannelBlock block;
  int cum_channels = 0;
  double id_distance = 0.0;  // identity distance after swapping everything picked so far
};

enum class StopReason { budget, threshold };

inline const char* stop_reason_name(StopReason r) {
  return r == StopReason::budget ? "budget" : "threshold";
}

struct GreedyStopRule {
  std::optional<int> channel_budget;
  std::optional<double> distance_threshold;
};

struct BlockSelection {
  ChannelBlockSet selected;
  std::vector<GreedyPick> curve;
  StopReason reason = StopReason::budget;
  double final_distance = 0.0;

  Csv to_csv() const {
    Csv csv({"picks", "cum_channels", "id_distance"});
    for (const auto& p : curve) {
      csv.add_row({csv_num(p.index), csv_num(p.cum_channels), csv_num(p.id_distance)});
    }
    return csv;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["stop_reason"] = stop_reason_name(reason);
    j["final_distance"] = final_distance;
    j["picked_blocks"] = nlohmann::ordered_json::array();
    for (const auto& p : curve) {
      j["picked_blocks"].push_back({{"layer", p.block.layer},
                                    {"start", p.block.start},
                                    {"length", p.block.length},
                                    {"cum_channels", p.cum_channels},
                                    {"id_distance", p.id_distance}});
    }
    return j;
  }
};

// Greedily swaps scan blocks into `source` from `target`, best per-channel
// score first, until the channel budget would be exceeded or the identity
// distance of the grown swap passes the threshold. With only a threshold set,
// an unreachable target consumes every block and reports a budget stop.
inline BlockSelection greedy_block_select(const ChannelScoreTable& table,
                                          const LatentCode& source, const LatentCode& target,
                                          const Backend& backend, const GreedyStopRule& stop) {
  if (!stop.channel_budget && !stop.distance_threshold) {
    throw std::invalid_argument("greedy block select: need a channel budget or a threshold");
  }
  if (stop.channel_budget && *stop.channel_budget < 1) {
    throw std::invalid_argument("greedy block select: channel budget must be positive");
  }
  if (stop.distance_threshold && !(*stop.distance_threshold >= 0.0)) {
    throw std::invalid_argument("greedy block select: threshold must be non-negative");
  }
  if (table.blocks.empty()) throw std::invalid_argument("greedy block select: empty score table");
  const LatentShape shape = backend.shape().latent_shape();
  if (source.shape() != shape || target.shape() != shape) {
    throw std::invalid_argument("greedy block select: latent shape mismatch");
  }

  std::vector<std::size_t> order(table.blocks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.blocks[a].per_channel > table.blocks[b].per_channel;
  });

  const IdentityEmbedding ref = backend.embed_identity(backend.generate(source));
  BlockSelection result;
  std::vector<ChannelBlock> picked;
  int cum = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ChannelBlock& block = table.blocks[order[rank]].block;
    if (stop.channel_budget && cum + block.length > *stop.channel_budget) break;
    picked.push_back(block);
    cum += block.length;
    const LatentCode swapped = swap_channels(source, target, ChannelBlockSet(picked));
    const double d = identity_distance(backend.embed_identity(backend.generate(swapped)), ref);
    result.curve.push_back(
        {static_cast<int>(result.curve.size()) + 1, block, cum, d});
    result.final_distance = d;
    if (stop.distance_threshold && d > *stop.distance_threshold) {
      result.reason = StopReason::threshold;
      break;
    }
  }
  if (picked.empty()) throw std::invalid_argument("greedy block select: budget below smallest block");
  result.selected = ChannelBlockSet(picked);
  return result;
}

}  // namespace idveil
