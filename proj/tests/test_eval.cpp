#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "idveil/eval/compare.hpp"
#include "idveil/eval/distribution.hpp"
#include "idveil/eval/diversity.hpp"
#include "idveil/eval/plot.hpp"
#include "idveil/eval/rank.hpp"
#include "idveil/eval/verification.hpp"
#include "idveil/util/rng.hpp"
#include "test_worlds.hpp"

using namespace idveil;

namespace {

IdentityEmbedding embed_at(std::vector<double> v) {
  IdentityEmbedding e;
  e.values = std::move(v);
  return e;
}

// Exhaustive comparison probability P(g < i) + P(g == i)/2, the oracle the
// trapezoidal AUC must reproduce exactly.
double pair_counting_auc(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  double score = 0.0;
  for (double dg : genuine) {
    for (double di : impostor) {
      if (dg < di) score += 1.0;
      else if (dg == di) score += 0.5;
    }
  }
  return score / (genuine.size() * impostor.size());
}

}  // namespace

TEST_CASE("roc separates and degenerates as expected") {
  const std::vector<double> low(5, 0.1), high(5, 2.0);
  const ROCCurve perfect = verification_roc(low, high);
  CHECK(perfect.auc == 1.0);
  CHECK(perfect.best_accuracy == 1.0);
  CHECK(perfect.best_threshold == 0.1);

  // Fully tied distances leave chance performance.
  const ROCCurve tied = verification_roc({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0});
  CHECK(tied.auc == 0.5);
  CHECK(tied.best_accuracy == 0.5);

  const ROCCurve frozen = verification_roc({0.1, 0.3}, {0.2, 0.4});
  CHECK(frozen.auc == 0.75);
  CHECK(frozen.best_accuracy == 0.75);

  const std::vector<double> none, one = {1.0}, bad = {std::nan("")};
  CHECK_THROWS_AS(verification_roc(none, one), std::invalid_argument);
  CHECK_THROWS_AS(verification_roc(one, none), std::invalid_argument);
  CHECK_THROWS_AS(verification_roc(bad, one), std::invalid_argument);
}

TEST_CASE("trapezoidal auc equals pair counting on tie-heavy samples") {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> g, im;
    const int ng = 3 + static_cast<int>(rng.next_below(45));
    const int ni = 3 + static_cast<int>(rng.next_below(45));
    // Integer-valued distances force plenty of exact ties.
    for (int i = 0; i < ng; ++i) g.push_back(static_cast<double>(rng.next_below(8)));
    for (int i = 0; i < ni; ++i) im.push_back(static_cast<double>(rng.next_below(8)));
    const ROCCurve roc = verification_roc(g, im);
    CHECK_THAT(roc.auc, Catch::Matchers::WithinAbs(pair_counting_auc(g, im), 1e-12));
    for (std::size_t i = 1; i < roc.thresholds.size(); ++i) {
      REQUIRE(roc.tpr[i] >= roc.tpr[i - 1]);
      REQUIRE(roc.fpr[i] >= roc.fpr[i - 1]);
    }
  }
}

TEST_CASE("roc on identically distributed samples sits at chance") {
  Rng rng(99);
  std::vector<double> g, im;
  for (int i = 0; i < 10000; ++i) {
    g.push_back(std::fabs(rng.next_normal()));
    im.push_back(std::fabs(rng.next_normal()));
  }
  const ROCCurve roc = verification_roc(g, im);
  CHECK(roc.auc > 0.45);
  CHECK(roc.auc < 0.55);
}

TEST_CASE("roc embedding overload matches the distance form") {
  const std::vector<EmbeddingPair> genuine = {{embed_at({0.0, 0.0}), embed_at({0.1, 0.0})},
                                              {embed_at({0.0, 0.0}), embed_at({0.3, 0.0})}};
  const std::vector<EmbeddingPair> impostor = {{embed_at({0.0, 0.0}), embed_at({0.2, 0.0})},
                                               {embed_at({0.0, 0.0}), embed_at({0.4, 0.0})}};
  const ROCCurve roc = verification_roc(genuine, impostor);
  CHECK(roc.auc == 0.75);
  const std::string csv = roc.to_csv().str();
  CHECK(csv.rfind("threshold,fpr,tpr\n", 0) == 0);
}

TEST_CASE("identification rank follows the tie-sharing definition") {
  // Distances to the origin probe are just the first coordinates here.
  const std::vector<LabeledEmbedding> gallery = {{"a", embed_at({0.1, 0.0})},
                                                 {"b", embed_at({0.2, 0.0})},
                                                 {"c", embed_at({0.5, 0.0})},
                                                 {"d", embed_at({0.9, 0.0})}};
  const std::vector<LabeledEmbedding> probe = {{"c", embed_at({0.0, 0.0})}};
  const RankReport two_below = identification_rank(gallery, probe);
  CHECK(two_below.ranks == std::vector<double>{3.0});
  CHECK(two_below.gallery_identities == 4);

  // Identity match at distance zero ranks first.
  const RankReport top = identification_rank(gallery, {{"a", embed_at({0.1, 0.0})}});
  CHECK(top.ranks == std::vector<double>{1.0});

  // A second gallery image closer to the probe carries the identity.
  std::vector<LabeledEmbedding> multi = gallery;
  multi.push_back({"c", embed_at({0.05, 0.0})});
  CHECK(identification_rank(multi, probe).ranks == std::vector<double>{1.0});

  // Equidistant gallery shares the average rank.
  std::vector<LabeledEmbedding> equi;
  for (int i = 0; i < 7; ++i) {
    std::vector<double> v(7, 0.0);
    v[i] = 1.0;
    equi.push_back({"id" + std::to_string(i), embed_at(std::move(v))});
  }
  const RankReport tie = identification_rank(equi, {{"id3", embed_at(std::vector<double>(7, 0.0))}});
  CHECK(tie.ranks == std::vector<double>{4.0});

  CHECK_THROWS_AS(identification_rank(gallery, {{"zz", embed_at({0.0, 0.0})}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(identification_rank({}, probe), std::invalid_argument);
}

TEST_CASE("rank statistics and scale invariance") {
  const std::vector<LabeledEmbedding> gallery = {{"a", embed_at({0.1, 0.0})},
                                                 {"b", embed_at({0.2, 0.0})},
                                                 {"c", embed_at({0.5, 0.0})}};
  const std::vector<LabeledEmbedding> probes = {{"a", embed_at({0.0, 0.0})},
                                                {"c", embed_at({0.0, 0.0})}};
  const RankReport report = identification_rank(gallery, probes);
  CHECK(report.ranks == std::vector<double>{1.0, 3.0});
  CHECK(report.mean == 2.0);
  CHECK(report.stddev == 1.0);
  CHECK(report.to_csv().str().rfind("probe,rank\n", 0) == 0);

  // Scaling every embedding scales every distance monotonically, which must
  // leave all ranks alone.
  auto scaled = [&](const std::vector<LabeledEmbedding>& in) {
    std::vector<LabeledEmbedding> out = in;
    for (LabeledEmbedding& e : out) {
      for (double& v : e.embed.values) v *= 37.5;
    }
    return out;
  };
  CHECK(identification_rank(scaled(gallery), scaled(probes)).ranks == report.ranks);
}

TEST_CASE("random probes rank uniformly over the gallery") {
  Rng rng(7);
  const int n_identities = 50;
  std::vector<LabeledEmbedding> gallery;
  for (int i = 0; i < n_identities; ++i) {
    std::vector<double> v(16);
    for (double& x : v) x = rng.next_normal();
    gallery.push_back({"id" + std::to_string(i), embed_at(std::move(v))});
  }
  double sum = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(16);
    for (double& x : v) x = rng.next_normal();
    const std::string label = "id" + std::to_string(rng.next_below(n_identities));
    sum += identification_rank(gallery, {{label, embed_at(std::move(v))}}).ranks[0];
  }
  const double expected = (n_identities + 1) / 2.0;
  CHECK(std::fabs(sum / trials - expected) < 0.1 * expected);
}

TEST_CASE("attribute distribution measures rate drift") {
  std::vector<AttributeVector> before(10), after(10);
  for (int i = 0; i < 10; ++i) {
    before[i].values = {i < 5 ? 0.9 : 0.1, 0.5};
    after[i].values = {i < 3 ? 0.9 : 0.1, 0.5};
  }
  const AttributeDistributionReport report = attribute_distribution(before, after, {0, 1}, 0.5);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].before_rate == 0.5);
  CHECK(report.rows[0].after_rate == 0.3);
  CHECK_THAT(report.rows[0].drift, Catch::Matchers::WithinAbs(0.2, 1e-15));
  // Scores exactly at the threshold count as negative.
  CHECK(report.rows[1].before_rate == 0.0);

  const auto flipped = attribute_distribution(after, before, {0, 1}, 0.5);
  CHECK(flipped.rows[0].drift == report.rows[0].drift);

  const auto same = attribute_distribution(before, before, {0, 1}, 0.5);
  CHECK(same.rows[0].drift == 0.0);
  CHECK(same.rows[1].drift == 0.0);

  CHECK(report.to_csv().str().rfind("attribute,before_rate,after_rate,drift\n", 0) == 0);
  CHECK_THROWS_AS(attribute_distribution(before, {after[0]}, {0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(attribute_distribution(before, after, {9}, 0.5), std::invalid_argument);
}

TEST_CASE("identity-only swapping preserves a minority attribute rate") {
  const SyntheticWorld world(testing::tiny_world());
  Rng rng(13);
  std::vector<AttributeVector> before, after;
  std::vector<double> scores;
  for (int i = 0; i < 100; ++i) {
    const LatentCode source = world.sample_random_latent(100 + i);
    const LatentCode donor = world.sample_random_latent(10000 + i);
    before.push_back(world.predict_attributes(world.generate(source)));
    // Swapping only the planted identity layers must not touch attributes.
    const LatentCode anon = swap_layers(source, donor, LayerSet({2, 3}));
    after.push_back(world.predict_attributes(world.generate(anon)));
    scores.push_back(before.back().values[0]);
  }
  // Pick the threshold so exactly two samples count positive before.
  std::sort(scores.begin(), scores.end());
  const double theta = (scores[97] + scores[98]) / 2.0;
  const AttributeDistributionReport report = attribute_distribution(before, after, {0}, theta);
  CHECK(report.rows[0].before_rate == 0.02);
  CHECK(report.rows[0].drift < 0.01);
}

TEST_CASE("diversity recovers planted cluster counts") {
  Rng rng(3);
  std::vector<IdentityEmbedding> embeds;
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < 5; ++c) {
    std::vector<double> center(6);
    for (double& v : center) v = 10.0 * rng.next_normal();
    centers.push_back(center);
    for (int p = 0; p < 8; ++p) {
      std::vector<double> v = center;
      for (double& x : v) x += 0.01 * rng.next_normal();
      embeds.push_back(embed_at(std::move(v)));
    }
  }
  DiversityConfig cfg;
  cfg.k_grid = {2, 3, 4, 5, 6, 7, 8};
  cfg.original_count = 5;
  const DiversityReport report = identity_diversity(embeds, cfg);
  CHECK(report.count == 5);
  CHECK(report.ratio == 1.0);
  CHECK(report.silhouette > 0.99);

  // Input order must not matter, down to the last bit.
  std::vector<IdentityEmbedding> shuffled = embeds;
  Rng(77).shuffle(shuffled);
  const DiversityReport re = identity_diversity(shuffled, cfg);
  CHECK(re.count == report.count);
  CHECK(re.silhouette == report.silhouette);
}

TEST_CASE("diversity edge cases") {
  DiversityConfig cfg;
  cfg.k_grid = {2, 3};
  cfg.original_count = 10;

  const std::vector<IdentityEmbedding> same(6, embed_at({1.0, 2.0}));
  const DiversityReport flat = identity_diversity(same, cfg);
  CHECK(flat.count == 1);
  CHECK(flat.ratio == 0.1);
  CHECK(flat.capped_ratio == 0.1);

  std::vector<IdentityEmbedding> two;
  for (int i = 0; i < 3; ++i) two.push_back(embed_at({0.0, 0.0}));
  for (int i = 0; i < 3; ++i) two.push_back(embed_at({10.0, 0.0}));
  cfg.k_grid = {2, 3, 4, 5};
  const DiversityReport pair = identity_diversity(two, cfg);
  CHECK(pair.count == 2);

  // More clusters found than the declared original count caps the ratio.
  cfg.original_count = 1;
  CHECK(identity_diversity(two, cfg).capped_ratio == 1.0);

  CHECK_THROWS_AS(identity_diversity({embed_at({1.0})}, cfg), std::invalid_argument);
  cfg.k_grid = {9};
  CHECK_THROWS_AS(identity_diversity(two, cfg), std::invalid_argument);
  cfg.k_grid = {};
  CHECK_THROWS_AS(identity_diversity(two, cfg), std::invalid_argument);
  cfg.k_grid = {2};
  cfg.original_count = 0;
  CHECK_THROWS_AS(identity_diversity(two, cfg), std::invalid_argument);

  std::vector<IdentityEmbedding> mixed = {embed_at({1.0, 0.0}), embed_at({1.0})};
  cfg.original_count = 2;
  CHECK_THROWS_AS(identity_diversity(mixed, cfg), std::invalid_argument);
}

TEST_CASE("method comparison tables") {
  MethodEntry mine;
  mine.name = "layer-swap";
  mine.metrics.identity_distance = {{"toy", {1.1, 0.2}}};
  const ComparisonTables single = compare_methods({mine});
  REQUIRE(single.distance.rows().size() == 1);
  CHECK(single.distance.rows()[0] == std::vector<std::string>{"layer-swap", "toy", "1.1", "0.2"});
  CHECK(single.auc.rows().empty());
  CHECK(single.rank.rows().empty());

  const MethodEntry ref = full_scale_reference();
  const ComparisonTables tables = compare_methods({ref});
  const std::string dist_csv = tables.distance.str();
  CHECK(dist_csv.find("latent-swap-reference,FaceNet,1.18,0.08") != std::string::npos);
  CHECK(dist_csv.find("latent-swap-reference,ArcFace,1.35,0.11") != std::string::npos);
  CHECK(dist_csv.find("latent-swap-reference,CurricularFace,1.29,0.08") != std::string::npos);
  const std::string auc_csv = tables.auc.str();
  CHECK(auc_csv.find("latent-swap-reference,FaceNet,0.6011") != std::string::npos);
  CHECK(auc_csv.find("latent-swap-reference,ArcFace,0.7127") != std::string::npos);
  CHECK(auc_csv.find("latent-swap-reference,CurricularFace,0.6805") != std::string::npos);

  MethodEntry other;
  other.name = "noise";
  other.metrics.identity_distance = {{"different-embedder", {0.4, 0.1}}};
  CHECK_THROWS_AS(compare_methods({mine, other}), std::invalid_argument);

  MethodEntry ranked = mine;
  ranked.name = "ranked";
  ranked.metrics.rank = MeanStd{12.0, 3.0};
  CHECK_THROWS_AS(compare_methods({mine, ranked}), std::invalid_argument);
  CHECK_THROWS_AS(compare_methods({}), std::invalid_argument);

  const auto json = tables.to_json();
  CHECK(json.contains("identity_distance"));
  CHECK(json.contains("auc"));
}

TEST_CASE("svg plots render deterministically") {
  const std::vector<PlotSeries> series = {
      {"roc", {{0.0, 0.0}, {0.2, 0.7}, {1.0, 1.0}}},
      {"chance", {{0.0, 0.0}, {1.0, 1.0}}},
  };
  const std::string chart = svg_line_chart(series, "verification", "fpr", "tpr");
  CHECK(chart.rfind("<svg", 0) == 0);
  CHECK(chart.find("roc") != std::string::npos);
  CHECK(chart.find("<path") != std::string::npos);
  CHECK(chart == svg_line_chart(series, "verification", "fpr", "tpr"));

  const std::string bars =
      svg_bar_chart({"a", "b", "c"}, {0.3, 0.9, 0.5}, "diversity", "ratio");
  std::size_t rects = 0;
  for (std::size_t pos = 0; (pos = bars.find("<rect", pos)) != std::string::npos; ++pos) ++rects;
  CHECK(rects == 4);  // three bars plus the background
  CHECK(bars.find("diversity") != std::string::npos);
}
