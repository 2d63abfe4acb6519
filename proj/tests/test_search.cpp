#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include <catch2/catch_amalgamated.hpp>

#include "idveil/search/channel_search.hpp"
#include "idveil/search/correlation.hpp"
#include "idveil/search/layer_search.hpp"
#include "idveil/search/push_away.hpp"
#include "test_worlds.hpp"

using namespace idveil;

namespace {

std::vector<LatentCode> sample_latents(const Backend& b, std::uint64_t first_seed, int count) {
  std::vector<LatentCode> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(b.sample_random_latent(first_seed + i));
  return out;
}

}  // namespace

TEST_CASE("window search recovers a planted consecutive band") {
  const SyntheticWorld world(testing::window_world(201));
  const auto sources = sample_latents(world, 1000, 6);
  const auto targets = sample_latents(world, 2000, 6);
  const auto result = layer_window_search(sources, targets, {1, 2, 3, 4, 5}, world);

  CHECK(result.best_consecutive.start == 5);
  CHECK(result.best_consecutive.length == 3);
  CHECK(result.pairs == 6);
  CHECK(result.symmetric);

  // The three strongest individual layers are exactly the planted ones.
  REQUIRE(result.top_individual.size() == 18);
  std::set<int> top3{result.top_individual[0].first, result.top_individual[1].first,
                     result.top_individual[2].first};
  CHECK(top3 == std::set<int>{5, 6, 7});

  // Swapping layers that carry no identity coordinates reproduces the source
  // embedding bit for bit, so the raw identity movement is exactly zero and
  // the score cannot be positive.
  for (const auto& w : result.table) {
    if (w.start + w.length <= 5 || w.start >= 8) {
      CHECK(w.mean_id == 0.0);
      CHECK(w.mean_ia <= 0.0);
    } else {
      CHECK(w.mean_id > 0.0);
    }
  }
}

TEST_CASE("window search with default planting peaks at the full identity band") {
  const SyntheticWorld world(testing::std_world());
  const auto sources = sample_latents(world, 50, 6);
  const auto targets = sample_latents(world, 150, 6);
  const auto result = layer_window_search(sources, targets, {1, 2, 3, 4, 5, 6}, world);
  CHECK(result.best_consecutive.start == 5);
  CHECK(result.best_consecutive.length == 5);
}

TEST_CASE("window search is deterministic across reruns and worker counts") {
  const SyntheticWorld world(testing::window_world(77));
  const auto sources = sample_latents(world, 10, 4);
  const auto targets = sample_latents(world, 20, 4);
  SearchOptions serial;
  serial.workers = 1;
  SearchOptions parallel = serial;
  parallel.workers = 4;
  const std::string a = layer_window_search(sources, targets, {1, 3}, world, serial).to_csv().str();
  const std::string b = layer_window_search(sources, targets, {1, 3}, world, serial).to_csv().str();
  const std::string c =
      layer_window_search(sources, targets, {1, 3}, world, parallel).to_csv().str();
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("window search validates its inputs") {
  const SyntheticWorld world(testing::tiny_world());
  const auto sources = sample_latents(world, 1, 2);
  const auto targets = sample_latents(world, 5, 2);
  CHECK_THROWS_AS(layer_window_search({}, {}, {1}, world), std::invalid_argument);
  CHECK_THROWS_AS(layer_window_search(sources, {targets[0]}, {1}, world), std::invalid_argument);
  CHECK_THROWS_AS(layer_window_search(sources, targets, {}, world), std::invalid_argument);
  CHECK_THROWS_AS(layer_window_search(sources, targets, {0}, world), std::invalid_argument);
  CHECK_THROWS_AS(layer_window_search(sources, targets, {7}, world), std::invalid_argument);
  const LatentCode wrong(3, 4);
  CHECK_THROWS_AS(layer_window_search({wrong, wrong}, targets, {1}, world), std::invalid_argument);
}

TEST_CASE("greedy layer selection finds scattered identity layers") {
  const SyntheticWorld world(testing::singleton_world(707));
  const auto sources = sample_latents(world, 300, 6);
  const auto targets = sample_latents(world, 400, 6);
  const auto result = greedy_layer_select(sources, targets, 3, world);
  CHECK(result.selected == LayerSet({5, 7, 9}));
  REQUIRE(result.steps.size() == 3);
  // Every step adds one of the planted layers, never a filler layer.
  for (const auto& s : result.steps) CHECK(result.selected.contains(s.layer));
  CHECK_THROWS_AS(greedy_layer_select(sources, targets, 0, world), std::invalid_argument);
  CHECK_THROWS_AS(greedy_layer_select(sources, targets, 19, world), std::invalid_argument);
}

TEST_CASE("channel scan localizes a planted block at several granularities") {
  const SyntheticWorld world(testing::block_world(303));  // identity: layer 8, channels 100-131
  const auto sources = sample_latents(world, 600, 5);
  const auto targets = sample_latents(world, 700, 5);

  SECTION("blocks of 16") {
    const auto table = channel_score_scan(sources, targets, {7, 8, 9}, 16, world);
    REQUIRE(table.blocks.size() == 3 * 16);
    std::vector<const BlockScore*> ranked;
    for (const auto& b : table.blocks) ranked.push_back(&b);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const BlockScore* a, const BlockScore* b) { return a->mean_ia > b->mean_ia; });
    // The planted span 100-131 touches the 16-blocks at 96, 112 and 128.
    std::set<std::pair<int, int>> top3;
    for (int i = 0; i < 3; ++i) top3.insert({ranked[i]->block.layer, ranked[i]->block.start});
    CHECK(top3 == std::set<std::pair<int, int>>{{8, 96}, {8, 112}, {8, 128}});
    // Block 112 lies entirely inside the planted span and beats the partial ones.
    CHECK(ranked[0]->block.start == 112);
    for (const auto& b : table.blocks) {
      const bool touches = b.block.layer == 8 && b.block.start + b.block.length > 100 &&
                           b.block.start <= 131;
      if (!touches) {
        CHECK(b.mean_id == 0.0);
        CHECK(b.mean_ia <= 0.0);
      }
    }
    // Block size 16 is already at smoothing resolution.
    REQUIRE(table.smoothed.size() == table.blocks.size());
    for (std::size_t i = 0; i < table.blocks.size(); ++i) {
      CHECK(table.smoothed[i].mean_ia == table.blocks[i].mean_ia);
    }
  }

  SECTION("single channels recover the exact planted set") {
    const auto table = channel_score_scan(sources, targets, {8}, 1, world);
    REQUIRE(table.blocks.size() == 256);
    std::vector<const BlockScore*> ranked;
    for (const auto& b : table.blocks) ranked.push_back(&b);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const BlockScore* a, const BlockScore* b) { return a->mean_ia > b->mean_ia; });
    std::set<int> top32;
    for (int i = 0; i < 32; ++i) top32.insert(ranked[i]->block.start);
    std::set<int> planted;
    for (int c = 100; c <= 131; ++c) planted.insert(c);
    CHECK(top32 == planted);
  }

  SECTION("blocks of 32") {
    const auto table = channel_score_scan(sources, targets, {8}, 32, world);
    REQUIRE(table.blocks.size() == 8);
    const BlockScore* best = &table.blocks.front();
    for (const auto& b : table.blocks) {
      if (b.mean_ia > best->mean_ia) best = &b;
    }
    // Channels 96-127 cover 28 of the 32 planted channels.
    CHECK(best->block.start == 96);
  }
}

TEST_CASE("channel scan handles tails and smoothing arithmetic") {
  SyntheticWorldConfig cfg;
  cfg.seed = 11;
  cfg.n_layers = 6;
  cfg.n_channels = 20;
  cfg.identity = LatentCoordSet::full_layers({2}, 20);
  cfg.attributes = {LatentCoordSet({{4, 0, 4}}), LatentCoordSet({{5, 5, 9}})};
  const SyntheticWorld world(cfg);
  const auto sources = sample_latents(world, 1, 4);
  const auto targets = sample_latents(world, 9, 4);

  SECTION("tail block is scored per channel") {
    const auto table = channel_score_scan(sources, targets, {2}, 16, world);
    REQUIRE(table.blocks.size() == 2);
    CHECK(table.blocks[0].block.length == 16);
    CHECK(table.blocks[1].block.start == 16);
    CHECK(table.blocks[1].block.length == 4);
    CHECK(table.blocks[0].per_channel == table.blocks[0].mean_ia / 16.0);
    CHECK(table.blocks[1].per_channel == table.blocks[1].mean_ia / 4.0);
  }

  SECTION("smoothed view averages fine blocks into 16-channel spans") {
    const auto table = channel_score_scan(sources, targets, {2, 3}, 4, world);
    REQUIRE(table.blocks.size() == 10);    // 5 blocks per layer
    REQUIRE(table.smoothed.size() == 4);   // per layer: span 0-15 plus tail 16-19
    const auto& span = table.smoothed[0];
    CHECK(span.block.layer == 2);
    CHECK(span.block.start == 0);
    CHECK(span.block.length == 16);
    const double expect = (table.blocks[0].mean_ia + table.blocks[1].mean_ia +
                           table.blocks[2].mean_ia + table.blocks[3].mean_ia) /
                          4.0;
    CHECK_THAT(span.mean_ia, Catch::Matchers::WithinAbs(expect, 1e-15));
    const auto& tail = table.smoothed[1];
    CHECK(tail.block.start == 16);
    CHECK(tail.block.length == 4);
    CHECK(tail.mean_ia == table.blocks[4].mean_ia);
  }

  SECTION("input validation") {
    CHECK_THROWS_AS(channel_score_scan(sources, targets, {}, 4, world), std::invalid_argument);
    CHECK_THROWS_AS(channel_score_scan(sources, targets, {6}, 4, world), std::invalid_argument);
    CHECK_THROWS_AS(channel_score_scan(sources, targets, {2}, 0, world), std::invalid_argument);
    CHECK_THROWS_AS(channel_score_scan(sources, targets, {2}, 21, world), std::invalid_argument);
  }
}

TEST_CASE("full-width channel blocks reproduce single-layer window scores") {
  const SyntheticWorld world(testing::window_world(404));
  const auto sources = sample_latents(world, 31, 5);
  const auto targets = sample_latents(world, 41, 5);
  std::vector<int> all_layers(18);
  for (int l = 0; l < 18; ++l) all_layers[l] = l;
  const auto table = channel_score_scan(sources, targets, all_layers, 32, world);
  const auto windows = layer_window_search(sources, targets, {1}, world);
  REQUIRE(table.blocks.size() == 18);
  REQUIRE(windows.table.size() == 18);
  // Identical candidate populations, so both the raw distances and the pooled
  // normalization agree and the scores match to the last bit of roundoff.
  for (int l = 0; l < 18; ++l) {
    CHECK(table.blocks[l].block.layer == l);
    CHECK_THAT(table.blocks[l].mean_id,
               Catch::Matchers::WithinAbs(windows.table[l].mean_id, 1e-12));
    CHECK_THAT(table.blocks[l].mean_ia,
               Catch::Matchers::WithinAbs(windows.table[l].mean_ia, 1e-12));
  }
}

TEST_CASE("greedy block selection honors budget and threshold stops") {
  const SyntheticWorld world(testing::block_world(55));
  const auto sources = sample_latents(world, 800, 4);
  const auto targets = sample_latents(world, 900, 4);
  const auto table = channel_score_scan(sources, targets, {8}, 16, world);
  const LatentCode probe_s = world.sample_random_latent(7001);
  const LatentCode probe_t = world.sample_random_latent(7002);

  SECTION("budget stop") {
    GreedyStopRule stop;
    stop.channel_budget = 32;
    const auto sel = greedy_block_select(table, probe_s, probe_t, world, stop);
    CHECK(sel.reason == StopReason::budget);
    REQUIRE(sel.curve.size() == 2);
    CHECK(sel.curve[0].cum_channels == 16);
    CHECK(sel.curve[1].cum_channels == 32);
    CHECK(sel.selected.selected_count(world.shape().latent_shape()) == 32);
    // The two best per-channel blocks both overlap the planted span.
    for (const auto& p : sel.curve) {
      CHECK(p.block.layer == 8);
      CHECK(p.block.start + p.block.length > 100);
      CHECK(p.block.start <= 131);
    }
    CHECK(sel.final_distance > 0.0);
  }

  SECTION("unreachable threshold falls back to a budget stop over all blocks") {
    GreedyStopRule stop;
    stop.distance_threshold = 1e9;
    const auto sel = greedy_block_select(table, probe_s, probe_t, world, stop);
    CHECK(sel.reason == StopReason::budget);
    CHECK(sel.curve.size() == table.blocks.size());
  }

  SECTION("threshold stop triggers on the crossing pick") {
    GreedyStopRule stop;
    stop.distance_threshold = 0.0;
    const auto sel = greedy_block_select(table, probe_s, probe_t, world, stop);
    CHECK(sel.reason == StopReason::threshold);
    REQUIRE(sel.curve.size() == 1);
    CHECK(sel.final_distance > 0.0);
  }

  SECTION("stop rule validation") {
    CHECK_THROWS_AS(greedy_block_select(table, probe_s, probe_t, world, {}),
                    std::invalid_argument);
    GreedyStopRule tiny;
    tiny.channel_budget = 8;  // smaller than any block of this scan
    CHECK_THROWS_AS(greedy_block_select(table, probe_s, probe_t, world, tiny),
                    std::invalid_argument);
  }
}

TEST_CASE("report CSV columns are pinned") {
  const SyntheticWorld world(testing::tiny_world());
  const auto sources = sample_latents(world, 61, 3);
  const auto targets = sample_latents(world, 71, 3);
  const auto windows = layer_window_search(sources, targets, {1, 2}, world);
  CHECK(windows.to_csv().str().rfind("i,m,score\n", 0) == 0);
  const auto table = channel_score_scan(sources, targets, {2}, 2, world);
  CHECK(table.to_csv().str().rfind("layer,block_start,score\n", 0) == 0);
  GreedyStopRule stop;
  stop.channel_budget = 4;
  const auto sel = greedy_block_select(table, sources[0], targets[0], world, stop);
  CHECK(sel.to_csv().str().rfind("picks,cum_channels,id_distance\n", 0) == 0);
  const auto greedy = greedy_layer_select(sources, targets, 2, world);
  CHECK(greedy.to_csv().str().rfind("step,layer,score\n", 0) == 0);
}

TEST_CASE("push away keeps the candidate that moves identity without attributes") {
  const SyntheticWorld world(testing::window_world(550));
  const LatentCode source = world.sample_random_latent(1);
  // Candidate A rewrites the planted identity band, candidate B only touches
  // attribute coordinates outside it.
  LatentCode far_identity = source;
  for (int l = 5; l <= 7; ++l) {
    for (int c = 0; c < far_identity.channels(); ++c) far_identity.at(l, c) += 3.0;
  }
  LatentCode attr_only = source;
  for (int c = 0; c < attr_only.channels(); ++c) attr_only.at(12, c) += 3.0;
  const LatentMask selection =
      mask_from_selection(source.shape(), LayerSet({5, 6, 7}));

  const auto result = push_away(source, {attr_only, far_identity}, selection, world);
  CHECK(result.chosen == 1);
  REQUIRE(result.all.size() == 2);
  // Blending attr_only over the identity band copies back the source's own
  // coordinates, so that candidate moves nothing at all.
  CHECK(result.all[0].raw_id == 0.0);
  CHECK(result.all[0].raw_attr == 0.0);
  CHECK(result.all[1].raw_id > 0.0);
  CHECK(result.latent == swap_layers(source, far_identity, LayerSet({5, 6, 7})));

  // Degenerate candidate population: every score collapses to zero and the
  // first candidate wins by convention.
  const auto flat = push_away(source, {source, source}, selection, world);
  CHECK(flat.chosen == 0);
  CHECK(flat.score.ia == 0.0);

  CHECK_THROWS_AS(push_away(source, {}, selection, world), std::invalid_argument);
}

TEST_CASE("pearson correlation matches hand-computed values") {
  CHECK_THAT(*pearson({1, 2, 3}, {3, 5, 7}), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(*pearson({1, 2, 3}, {4, 2, 0}), Catch::Matchers::WithinAbs(-1.0, 1e-12));
  // x = {1,2,3,4}, y = {1,3,2,5}: cov sum 5.5, variance sums 5 and 8.75,
  // so r = 5.5 / sqrt(43.75).
  CHECK_THAT(*pearson({1, 2, 3, 4}, {1, 3, 2, 5}),
             Catch::Matchers::WithinAbs(0.8315218406, 1e-9));
  CHECK_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());
  CHECK_FALSE(pearson({5}, {2}).has_value());
  CHECK_THROWS_AS(pearson({1, 2}, {1}), std::invalid_argument);
}

TEST_CASE("correlation separates entangled from independent attributes") {
  // Attribute 0 shares coordinates with the identity band; attribute 1 lives
  // on an untouched layer. Swapping the band must move the first prediction
  // and leave the second constant.
  SyntheticWorldConfig cfg;
  cfg.seed = 23;
  cfg.n_layers = 6;
  cfg.n_channels = 8;
  cfg.identity = LatentCoordSet::full_layers({2, 3}, 8);
  cfg.attributes = {LatentCoordSet({{2, 0, 3}}), LatentCoordSet({{4, 0, 3}})};
  const SyntheticWorld world(cfg);
  const auto sources = sample_latents(world, 100, 12);
  const auto targets = sample_latents(world, 200, 12);

  const auto report = attribute_identity_correlation(sources, targets, LayerSet({2, 3}), world);
  CHECK(report.samples == 24);
  REQUIRE(report.per_attribute.size() == 2);
  REQUIRE(report.per_attribute[0].r.has_value());
  CHECK(std::fabs(*report.per_attribute[0].r) > 0.0);
  CHECK_FALSE(report.per_attribute[1].r.has_value());
  CHECK(report.ranking().front() == 0);
  CHECK(report.to_csv().str().rfind("attribute,r\n", 0) == 0);

  CHECK_THROWS_AS(attribute_identity_correlation(sources, targets, LayerSet(), world),
                  std::invalid_argument);
  CHECK_THROWS_AS(attribute_identity_correlation(sources, targets, LayerSet({9}), world),
                  std::invalid_argument);
}

TEST_CASE("scores do not depend on pair order") {
  const SyntheticWorld world(testing::window_world(660));
  auto sources = sample_latents(world, 81, 4);
  auto targets = sample_latents(world, 91, 4);
  const auto before = layer_window_search(sources, targets, {1, 3}, world);
  std::swap(sources[0], sources[3]);
  std::swap(targets[0], targets[3]);
  const auto after = layer_window_search(sources, targets, {1, 3}, world);
  for (std::size_t i = 0; i < before.table.size(); ++i) {
    CHECK_THAT(after.table[i].mean_ia,
               Catch::Matchers::WithinAbs(before.table[i].mean_ia, 1e-12));
  }
}

TEST_CASE("asymmetric evaluation uses one direction per pair") {
  const SyntheticWorld world(testing::window_world(880));
  const auto sources = sample_latents(world, 11, 4);
  const auto targets = sample_latents(world, 21, 4);
  SearchOptions opt;
  opt.symmetric = false;
  const auto result = layer_window_search(sources, targets, {1, 2, 3}, world, opt);
  CHECK_FALSE(result.symmetric);
  CHECK(result.best_consecutive.start == 5);
  CHECK(result.best_consecutive.length == 3);
}
