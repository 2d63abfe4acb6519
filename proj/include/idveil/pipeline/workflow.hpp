#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idveil/anon/mask_anon.hpp"
#include "idveil/eval/compare.hpp"
#include "idveil/eval/distribution.hpp"
#include "idveil/eval/diversity.hpp"
#include "idveil/eval/plot.hpp"
#include "idveil/eval/rank.hpp"
#include "idveil/eval/verification.hpp"
#include "idveil/io/image_io.hpp"
#include "idveil/metrics/disent.hpp"
#include "idveil/pipeline/cache.hpp"
#include "idveil/pipeline/manifest.hpp"
#include "idveil/pipeline/run_config.hpp"
#include "idveil/search/channel_search.hpp"
#include "idveil/search/layer_search.hpp"
#include "idveil/swapper/checkpoint.hpp"
#include "idveil/swapper/training.hpp"
#include "idveil/version.hpp"

namespace idveil {

struct WorkflowResult {
  std::string workflow;
  std::size_t images = 0;
  std::vector<std::string> outputs;  // paths relative to the output directory
  nlohmann::ordered_json summary;
};

namespace detail {

inline std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Shared state of one workflow run: validated config, backend, working set
// and output bookkeeping. Everything the run writes goes through the save_*
// helpers so the result records each artifact exactly once.
struct RunContext {
  RunConfig cfg;
  std::unique_ptr<Backend> backend;
  DatasetManifest manifest;
  std::filesystem::path out;
  std::vector<std::string> ids;  // entries that survived ingest + caching
  std::vector<Image> images;
  std::vector<LatentCode> latents;
  WorkflowResult result;
  std::string stage = "setup";

  SearchOptions search_options() const {
    SearchOptions opt;
    opt.metric = cfg.metric;
    opt.workers = cfg.workers;
    return opt;
  }

  void save_text(const std::string& rel, const std::string& content) {
    const std::filesystem::path path = out / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << content;
    if (!os) throw IoError("write failed: " + path.string());
    result.outputs.push_back(rel);
  }

  void save_csv(const std::string& rel, const Csv& csv) { save_text(rel, csv.str()); }

  void save_json(const std::string& rel, const nlohmann::ordered_json& j) {
    save_text(rel, j.dump(2) + "\n");
  }

  void save_image(const std::string& rel, const Image& im) {
    const std::filesystem::path path = out / rel;
    std::filesystem::create_directories(path.parent_path());
    write_pfm(path.string(), im);
    result.outputs.push_back(rel);
  }

  // Per-image donor latent. Seeded from the image id, not its position, so a
  // given image keeps its donor when the working set changes.
  LatentCode donor_for(const std::string& id) const {
    return backend->sample_random_latent(derive_seed(cfg.seed, id_hash(id)));
  }

  std::vector<LatentCode> donors() const {
    std::vector<LatentCode> out_donors;
    out_donors.reserve(ids.size());
    for (const auto& id : ids) out_donors.push_back(donor_for(id));
    return out_donors;
  }

  // Default identity layers when the config does not pin them: the middle
  // band, clipped to the backend's layer count, every layer as a fallback.
  LayerSet identity_layers() const {
    if (!cfg.anon_layers.empty()) return LayerSet(cfg.anon_layers);
    const int n = backend->shape().n_layers;
    std::vector<int> band;
    for (int l = 5; l <= 9 && l < n; ++l) band.push_back(l);
    if (band.empty()) {
      for (int l = 0; l < n; ++l) band.push_back(l);
    }
    return LayerSet(band);
  }
};

inline RunContext begin_run(const RunConfig& cfg, const char* workflow, bool need_latents) {
  cfg.validate();
  RunContext ctx;
  ctx.cfg = cfg;
  ctx.result.workflow = workflow;
  // No side effects until the config, backend and dataset all load cleanly.
  ctx.backend = make_backend(cfg.backend_spec);
  ctx.manifest = ingest(cfg.data_dir,
                        cfg.labels_path.empty()
                            ? std::optional<std::filesystem::path>{}
                            : std::optional<std::filesystem::path>{cfg.labels_path});

  ctx.out = cfg.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(ctx.out, ec);
  if (ec) throw IoError("cannot create output directory " + ctx.out.string());

  nlohmann::ordered_json meta;
  meta["version"] = kVersion;
  meta["workflow"] = workflow;
  meta["backend"] = ctx.backend->id();
  meta["seed"] = cfg.seed;
  meta["config"] = cfg.raw;
  ctx.save_json("run_metadata.json", meta);

  if (ctx.manifest.empty()) {
    ctx.result.summary["warning"] = "no images found in " + cfg.data_dir;
    return ctx;
  }

  if (need_latents) {
    ctx.stage = "cache-latents";
    const CacheReport cache = cache_latents(ctx.manifest, *ctx.backend, ctx.out / "latents");
    ctx.save_csv("cache_report.csv", cache.to_csv());
    if (cache.failed > 0) ctx.result.summary["cache_failures"] = cache.failed;
    for (const auto& row : cache.rows) {
      if (row.status == "failed") continue;
      const ManifestEntry* entry = ctx.manifest.find(row.id);
      ctx.ids.push_back(row.id);
      ctx.images.push_back(read_pfm(entry->path));
      ctx.latents.push_back(load_cached_latent(ctx.out / "latents", row.id));
    }
    if (ctx.ids.empty()) {
      ctx.result.summary["warning"] = "every image failed to encode";
    }
  } else {
    for (const auto& entry : ctx.manifest.entries) ctx.ids.push_back(entry.id);
  }
  ctx.result.images = ctx.ids.size();
  return ctx;
}

// Runs the body and, if it throws after outputs have started, leaves an
// error manifest next to the partial artifacts before re-throwing.
template <typename Fn>
WorkflowResult guarded(RunContext& ctx, Fn&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    try {
      nlohmann::ordered_json j;
      j["workflow"] = ctx.result.workflow;
      j["stage"] = ctx.stage;
      j["error"] = e.what();
      ctx.save_json("error_manifest.json", j);
    } catch (...) {
      // the original error matters more than a failed manifest write
    }
    throw;
  }
  return std::move(ctx.result);
}

// Anonymization epilogue shared by every mode: per-image identity distance
// against the source, CSV report, sorted-distance profile plot and summary
// statistics including the fraction clearing the distance target.
inline void privacy_report(RunContext& ctx, const std::vector<Image>& anonymized) {
  ctx.stage = "privacy-report";
  Csv csv({"id", "identity_distance", "meets_target"});
  std::vector<double> distances;
  distances.reserve(ctx.ids.size());
  int met = 0;
  for (std::size_t i = 0; i < ctx.ids.size(); ++i) {
    const double d = identity_distance(ctx.backend->embed_identity(ctx.images[i]),
                                       ctx.backend->embed_identity(anonymized[i]));
    const bool ok = d >= ctx.cfg.metric.gamma;
    met += ok ? 1 : 0;
    distances.push_back(d);
    csv.add_row({ctx.ids[i], csv_num(d), ok ? "1" : "0"});
  }
  ctx.save_csv("privacy_report.csv", csv);

  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  PlotSeries series{"identity distance", {}};
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    series.points.emplace_back(static_cast<double>(i + 1), sorted[i]);
  }
  ctx.save_text("distance_profile.svg",
                svg_line_chart({series}, "identity distance profile", "image (sorted)",
                               "distance"));

  double sum = 0.0;
  for (double d : distances) sum += d;
  auto& s = ctx.result.summary;
  s["mean_identity_distance"] = distances.empty() ? 0.0 : sum / distances.size();
  s["min_identity_distance"] = sorted.empty() ? 0.0 : sorted.front();
  s["max_identity_distance"] = sorted.empty() ? 0.0 : sorted.back();
  s["distance_target"] = ctx.cfg.metric.gamma;
  s["target_fraction"] =
      distances.empty() ? 0.0 : static_cast<double>(met) / static_cast<double>(distances.size());
}

inline void anonymize_layers(RunContext& ctx) {
  const auto donors = ctx.donors();
  LayerSet selection;
  if (ctx.cfg.anon_layers.empty()) {
    ctx.stage = "layer-search";
    const LayerSearchResult search = layer_window_search(
        ctx.latents, donors, ctx.cfg.window_lengths, *ctx.backend, ctx.search_options());
    ctx.save_csv("layer_scores.csv", search.to_csv());
    ctx.save_json("layer_search.json", search.to_json());
    selection = LayerSet::consecutive(search.best_consecutive.start,
                                      search.best_consecutive.length);
    if (ctx.cfg.greedy_k > 0) {
      const GreedyLayerResult greedy = greedy_layer_select(
          ctx.latents, donors, ctx.cfg.greedy_k, *ctx.backend, ctx.search_options());
      ctx.save_csv("greedy_layers.csv", greedy.to_csv());
    }
  } else {
    selection = LayerSet(ctx.cfg.anon_layers);
  }
  ctx.result.summary["selected_layers"] = selection.indices();

  ctx.stage = "anonymize";
  std::vector<Image> anonymized;
  anonymized.reserve(ctx.ids.size());
  for (std::size_t i = 0; i < ctx.ids.size(); ++i) {
    anonymized.push_back(
        ctx.backend->generate(swap_layers(ctx.latents[i], donors[i], selection)));
    ctx.save_image("anon/" + ctx.ids[i] + ".pfm", anonymized.back());
  }
  privacy_report(ctx, anonymized);
}

inline void anonymize_channels(RunContext& ctx) {
  const auto donors = ctx.donors();
  std::vector<int> layers = ctx.cfg.scan_layers;
  if (layers.empty()) {
    for (int l = 0; l < ctx.backend->shape().n_layers; ++l) layers.push_back(l);
  }
  ctx.stage = "channel-scan";
  const ChannelScoreTable table = channel_score_scan(
      ctx.latents, donors, layers, ctx.cfg.block_size, *ctx.backend, ctx.search_options());
  ctx.save_csv("channel_scores.csv", table.to_csv());

  GreedyStopRule stop;
  stop.channel_budget = ctx.cfg.channel_budget;
  stop.distance_threshold = ctx.cfg.distance_threshold;
  if (!stop.channel_budget && !stop.distance_threshold) {
    stop.distance_threshold = ctx.cfg.metric.gamma;
  }

  ctx.stage = "greedy-select";
  Csv picks({"id", "picks", "channels", "final_distance", "stop_reason"});
  std::vector<Image> anonymized;
  anonymized.reserve(ctx.ids.size());
  for (std::size_t i = 0; i < ctx.ids.size(); ++i) {
    const BlockSelection sel =
        greedy_block_select(table, ctx.latents[i], donors[i], *ctx.backend, stop);
    if (i == 0) {
      ctx.save_csv("greedy_curve.csv", sel.to_csv());
      PlotSeries series{"identity distance", {}};
      for (const auto& p : sel.curve) {
        series.points.emplace_back(static_cast<double>(p.cum_channels), p.id_distance);
      }
      ctx.save_text("greedy_curve.svg",
                    svg_line_chart({series}, "greedy channel swapping", "channels swapped",
                                   "identity distance"));
    }
    picks.add_row({ctx.ids[i], csv_num(sel.curve.size()),
                   csv_num(sel.curve.empty() ? 0 : sel.curve.back().cum_channels),
                   csv_num(sel.final_distance), stop_reason_name(sel.reason)});
    anonymized.push_back(
        ctx.backend->generate(swap_channels(ctx.latents[i], donors[i], sel.selected)));
    ctx.save_image("anon/" + ctx.ids[i] + ".pfm", anonymized.back());
  }
  ctx.save_csv("greedy_picks.csv", picks);
  privacy_report(ctx, anonymized);
}

inline void anonymize_mask(RunContext& ctx) {
  const RegionSet regions = parse_region_set(ctx.cfg.regions);
  const LatentMask identity_mask =
      mask_from_selection(ctx.backend->shape().latent_shape(), ctx.identity_layers());
  const DonorSource donor = donor_source_from_name(ctx.cfg.donor);

  ctx.stage = "anonymize";
  std::vector<Image> anonymized;
  anonymized.reserve(ctx.ids.size());
  for (std::size_t i = 0; i < ctx.ids.size(); ++i) {
    anonymized.push_back(anonymize_masked(ctx.images[i], regions,
                                          derive_seed(ctx.cfg.seed, id_hash(ctx.ids[i])),
                                          identity_mask, *ctx.backend, ctx.cfg.color_match,
                                          donor));
    ctx.save_image("anon/" + ctx.ids[i] + ".pfm", anonymized.back());
  }

  ctx.stage = "attribute-drift";
  std::vector<AttributeVector> before, after;
  before.reserve(ctx.ids.size());
  for (std::size_t i = 0; i < ctx.ids.size(); ++i) {
    before.push_back(ctx.backend->predict_attributes(ctx.images[i]));
    after.push_back(ctx.backend->predict_attributes(anonymized[i]));
  }
  std::vector<int> attrs(static_cast<std::size_t>(ctx.backend->shape().n_attributes));
  for (std::size_t j = 0; j < attrs.size(); ++j) attrs[j] = static_cast<int>(j);
  const auto drift = attribute_distribution(before, after, attrs, ctx.cfg.metric.theta);
  ctx.save_csv("attribute_drift.csv", drift.to_csv());
  double max_drift = 0.0;
  for (const auto& r : drift.rows) max_drift = std::max(max_drift, r.drift);
  ctx.result.summary["max_attribute_drift"] = max_drift;

  privacy_report(ctx, anonymized);
}

// Ground-truth construction plus training, shared by the swapper mode and
// the train-swapper command. Returns the trained network.
inline TrainingResult swapper_training(RunContext& ctx) {
  const RegionSet regions = parse_region_set(ctx.cfg.regions);
  const LatentMask identity_mask =
      mask_from_selection(ctx.backend->shape().latent_shape(), ctx.identity_layers());

  ctx.stage = "ground-truth";
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(ctx.cfg.swapper_donors));
  for (int s = 0; s < ctx.cfg.swapper_donors; ++s) {
    seeds.push_back(derive_seed(ctx.cfg.seed, 1000003ull + static_cast<std::uint64_t>(s)));
  }
  const GroundTruthSet gt =
      build_ground_truth(ctx.images, ctx.ids, seeds, identity_mask, *ctx.backend, regions);
  if (!gt.skipped.empty()) {
    Csv skipped({"note"});
    for (const auto& note : gt.skipped) skipped.add_row({note});
    ctx.save_csv("ground_truth_skipped.csv", skipped);
  }
  if (gt.pairs.empty()) {
    throw BackendError("swapper: ground truth construction produced no usable pairs");
  }
  ctx.result.summary["ground_truth_pairs"] = gt.pairs.size();

  ctx.stage = "train";
  SwapperConfig net_cfg = SwapperConfig::for_shape(ctx.backend->shape().latent_shape());
  if (ctx.cfg.swapper_hidden > 0) net_cfg.hidden = ctx.cfg.swapper_hidden;
  TrainingConfig tcfg;
  tcfg.lambda_l2 = ctx.cfg.lambda_l2;
  tcfg.lambda_id = ctx.cfg.lambda_id;
  tcfg.learning_rate = ctx.cfg.swapper_lr;
  tcfg.split = ctx.cfg.swapper_split;
  tcfg.epochs = ctx.cfg.swapper_epochs;
  tcfg.batch_size = ctx.cfg.swapper_batch;
  tcfg.seed = ctx.cfg.seed;
  TrainingResult trained = train_swapper(net_cfg, tcfg, gt.pairs, *ctx.backend);

  ctx.save_csv("training_history.csv", trained.history_csv());
  PlotSeries series{"training loss", {}};
  for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e) {
    series.points.emplace_back(static_cast<double>(e + 1), trained.epoch_loss[e]);
  }
  ctx.save_text("training_loss.svg",
                svg_line_chart({series}, "swapper training", "epoch", "loss"));
  CheckpointMeta meta;
  meta.training = tcfg;
  meta.backend_id = ctx.backend->id();
  save_checkpoint((ctx.out / "swapper.json").string(), (ctx.out / "swapper.bin").string(),
                  trained.net, meta);
  ctx.result.outputs.push_back("swapper.json");
  ctx.result.outputs.push_back("swapper.bin");
  ctx.result.summary["train_pairs"] = trained.train_pairs;
  ctx.result.summary["test_pairs"] = trained.test_pairs;
  ctx.result.summary["final_train_loss"] =
      trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back();
  ctx.result.summary["test_loss"] = trained.test_loss;
  return trained;
}

inline void anonymize_swapper(RunContext& ctx) {
  const TrainingResult trained = swapper_training(ctx);
  ctx.stage = "anonymize";
  std::vector<Image> anonymized;
  anonymized.reserve(ctx.ids.size());
  for (std::size_t i = 0; i < ctx.ids.size(); ++i) {
    const LatentCode l_hat =
        trained.net.forward(ctx.latents[i], ctx.donor_for(ctx.ids[i])).l_hat;
    anonymized.push_back(ctx.backend->generate(l_hat));
    ctx.save_image("anon/" + ctx.ids[i] + ".pfm", anonymized.back());
  }
  privacy_report(ctx, anonymized);
}

}  // namespace detail

// Layer-search command: score tables and plots only, no anonymized outputs.
inline WorkflowResult search_layers_workflow(const RunConfig& cfg) {
  detail::RunContext ctx = detail::begin_run(cfg, "search-layers", /*need_latents=*/true);
  return detail::guarded(ctx, [&] {
    if (ctx.ids.empty()) return;
    const auto donors = ctx.donors();
    ctx.stage = "layer-search";
    const LayerSearchResult search = layer_window_search(
        ctx.latents, donors, cfg.window_lengths, *ctx.backend, ctx.search_options());
    ctx.save_csv("layer_scores.csv", search.to_csv());
    ctx.save_json("layer_search.json", search.to_json());

    PlotSeries series{"window score", {}};
    for (const auto& w : search.table) {
      if (w.length == 1) series.points.emplace_back(static_cast<double>(w.start), w.mean_ia);
    }
    if (!series.points.empty()) {
      ctx.save_text("layer_scores.svg",
                    svg_line_chart({series}, "single-layer swap scores", "layer", "score"));
    }
    if (cfg.greedy_k > 0) {
      const GreedyLayerResult greedy = greedy_layer_select(ctx.latents, donors, cfg.greedy_k,
                                                           *ctx.backend, ctx.search_options());
      ctx.save_csv("greedy_layers.csv", greedy.to_csv());
      ctx.result.summary["greedy_layers"] = greedy.selected.indices();
    }
    ctx.result.summary["best_start"] = search.best_consecutive.start;
    ctx.result.summary["best_length"] = search.best_consecutive.length;
    ctx.result.summary["best_score"] = search.best_consecutive.mean_ia;
  });
}

// Channel-search command: block scan table plus the greedy curve for the
// first pair when a stop rule is configured.
inline WorkflowResult search_channels_workflow(const RunConfig& cfg) {
  detail::RunContext ctx = detail::begin_run(cfg, "search-channels", /*need_latents=*/true);
  return detail::guarded(ctx, [&] {
    if (ctx.ids.empty()) return;
    const auto donors = ctx.donors();
    std::vector<int> layers = cfg.scan_layers;
    if (layers.empty()) {
      for (int l = 0; l < ctx.backend->shape().n_layers; ++l) layers.push_back(l);
    }
    ctx.stage = "channel-scan";
    const ChannelScoreTable table = channel_score_scan(ctx.latents, donors, layers,
                                                       cfg.block_size, *ctx.backend,
                                                       ctx.search_options());
    ctx.save_csv("channel_scores.csv", table.to_csv());
    if (!table.blocks.empty()) {
      const auto best = std::max_element(
          table.blocks.begin(), table.blocks.end(),
          [](const BlockScore& a, const BlockScore& b) { return a.mean_ia < b.mean_ia; });
      ctx.result.summary["blocks_scored"] = table.blocks.size();
      ctx.result.summary["best_block"] = {{"layer", best->block.layer},
                                          {"start", best->block.start},
                                          {"length", best->block.length},
                                          {"score", best->mean_ia}};
    }
    if (cfg.channel_budget || cfg.distance_threshold) {
      GreedyStopRule stop;
      stop.channel_budget = cfg.channel_budget;
      stop.distance_threshold = cfg.distance_threshold;
      ctx.stage = "greedy-select";
      const BlockSelection sel =
          greedy_block_select(table, ctx.latents[0], donors[0], *ctx.backend, stop);
      ctx.save_csv("greedy_curve.csv", sel.to_csv());
      ctx.result.summary["greedy_final_distance"] = sel.final_distance;
      ctx.result.summary["greedy_stop"] = stop_reason_name(sel.reason);
    }
  });
}

// Anonymization workflow; cfg.mode picks the pipeline.
inline WorkflowResult run_workflow(const RunConfig& cfg) {
  detail::RunContext ctx = detail::begin_run(cfg, ("anonymize-" + cfg.mode).c_str(),
                                             /*need_latents=*/true);
  return detail::guarded(ctx, [&] {
    if (ctx.ids.empty()) return;
    if (cfg.mode == "layers") {
      detail::anonymize_layers(ctx);
    } else if (cfg.mode == "channels") {
      detail::anonymize_channels(ctx);
    } else if (cfg.mode == "mask") {
      detail::anonymize_mask(ctx);
    } else {
      detail::anonymize_swapper(ctx);
    }
  });
}

// Training-only command for the latent swapper.
inline WorkflowResult train_swapper_workflow(const RunConfig& cfg) {
  detail::RunContext ctx = detail::begin_run(cfg, "train-swapper", /*need_latents=*/true);
  return detail::guarded(ctx, [&] {
    if (ctx.ids.empty()) return;
    detail::swapper_training(ctx);
  });
}

// Privacy evaluation of a finished anonymization run: verification ROC,
// identification rank, attribute drift, identity diversity and comparison
// tables against the full-scale reference row.
inline WorkflowResult evaluate_workflow(const RunConfig& cfg) {
  cfg.validate();
  const std::filesystem::path anon_dir = cfg.anon_output_dir();
  if (!std::filesystem::exists(anon_dir)) {
    throw ConfigError("anonymized image directory " + anon_dir.string() +
                      " does not exist (run anonymize first or set eval.anon_dir)");
  }

  detail::RunContext ctx = detail::begin_run(cfg, "evaluate", /*need_latents=*/false);
  return detail::guarded(ctx, [&] {
    if (ctx.manifest.empty()) return;
    ctx.stage = "match";
    const DatasetManifest anon_manifest = ingest(anon_dir);
    std::vector<std::string> ids;
    Csv gaps({"id", "missing_side"});
    for (const auto& e : ctx.manifest.entries) {
      if (anon_manifest.find(e.id) != nullptr) {
        ids.push_back(e.id);
      } else {
        gaps.add_row({e.id, "anonymized"});
      }
    }
    for (const auto& e : anon_manifest.entries) {
      if (ctx.manifest.find(e.id) == nullptr) gaps.add_row({e.id, "original"});
    }
    if (!gaps.rows().empty()) ctx.save_csv("evaluation_gaps.csv", gaps);
    if (ids.empty()) {
      throw ConfigError("evaluate: no image ids occur in both " + cfg.data_dir + " and " +
                        anon_dir.string());
    }
    ctx.result.images = ids.size();

    ctx.stage = "embed";
    std::vector<IdentityEmbedding> orig_embeds, anon_embeds;
    std::vector<AttributeVector> orig_attrs, anon_attrs;
    std::vector<std::string> labels;
    for (const auto& id : ids) {
      const Image orig = read_pfm(ctx.manifest.find(id)->path);
      const Image anon = read_pfm(anon_manifest.find(id)->path);
      orig_embeds.push_back(ctx.backend->embed_identity(orig));
      anon_embeds.push_back(ctx.backend->embed_identity(anon));
      orig_attrs.push_back(ctx.backend->predict_attributes(orig));
      anon_attrs.push_back(ctx.backend->predict_attributes(anon));
      const std::string& identity = ctx.manifest.find(id)->identity;
      labels.push_back(identity.empty() ? id : identity);
    }

    ctx.stage = "distances";
    Csv dist_csv({"id", "identity_distance"});
    std::vector<double> genuine;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      genuine.push_back(identity_distance(orig_embeds[i], anon_embeds[i]));
      dist_csv.add_row({ids[i], csv_num(genuine.back())});
    }
    ctx.save_csv("eval_distances.csv", dist_csv);
    double mean = 0.0;
    for (double d : genuine) mean += d;
    mean /= static_cast<double>(genuine.size());
    double var = 0.0;
    for (double d : genuine) var += (d - mean) * (d - mean);
    const double stddev = std::sqrt(var / static_cast<double>(genuine.size()));
    ctx.result.summary["mean_identity_distance"] = mean;
    ctx.result.summary["stddev_identity_distance"] = stddev;

    // The simulated recognition attack matches anonymized probes against
    // original enrollments: genuine attempts pair an image with its own
    // anonymization, impostor attempts cross different identities.
    ctx.stage = "verification";
    std::optional<ROCCurve> roc;
    std::vector<double> impostor;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (i == j || labels[i] == labels[j]) continue;
        impostor.push_back(identity_distance(orig_embeds[i], anon_embeds[j]));
      }
    }
    if (!impostor.empty()) {
      roc = verification_roc(genuine, impostor);
      ctx.save_csv("roc.csv", roc->to_csv());
      PlotSeries curve{"ROC", {}};
      for (std::size_t i = 0; i < roc->fpr.size(); ++i) {
        curve.points.emplace_back(roc->fpr[i], roc->tpr[i]);
      }
      ctx.save_text("roc.svg", svg_line_chart({curve}, "verification ROC",
                                              "false positive rate", "true positive rate"));
      ctx.result.summary["auc"] = roc->auc;
      ctx.result.summary["best_accuracy"] = roc->best_accuracy;
    } else {
      ctx.result.summary["auc_note"] = "fewer than two identities, ROC skipped";
    }

    ctx.stage = "rank";
    std::optional<RankReport> rank;
    if (std::set<std::string>(labels.begin(), labels.end()).size() >= 2) {
      std::vector<LabeledEmbedding> gallery, probes;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        gallery.push_back({labels[i], orig_embeds[i]});
        probes.push_back({labels[i], anon_embeds[i]});
      }
      rank = identification_rank(gallery, probes);
      ctx.save_csv("rank.csv", rank->to_csv());
      ctx.result.summary["mean_rank"] = rank->mean;
      ctx.result.summary["rank_stddev"] = rank->stddev;
    } else {
      ctx.result.summary["rank_note"] = "fewer than two identities, rank skipped";
    }

    ctx.stage = "attribute-drift";
    std::vector<int> attrs(static_cast<std::size_t>(ctx.backend->shape().n_attributes));
    for (std::size_t j = 0; j < attrs.size(); ++j) attrs[j] = static_cast<int>(j);
    const auto drift = attribute_distribution(orig_attrs, anon_attrs, attrs, cfg.metric.theta);
    ctx.save_csv("attribute_drift.csv", drift.to_csv());
    double max_drift = 0.0;
    for (const auto& r : drift.rows) max_drift = std::max(max_drift, r.drift);
    ctx.result.summary["max_attribute_drift"] = max_drift;

    ctx.stage = "diversity";
    std::vector<int> usable_k;
    for (int k : cfg.k_grid) {
      if (k >= 2 && k + 1 <= static_cast<int>(ids.size())) usable_k.push_back(k);
    }
    if (!usable_k.empty() && ids.size() >= 3) {
      DiversityConfig dcfg;
      dcfg.k_grid = usable_k;
      dcfg.original_count =
          static_cast<int>(std::set<std::string>(labels.begin(), labels.end()).size());
      const DiversityReport div = identity_diversity(anon_embeds, dcfg);
      ctx.result.summary["identity_count"] = div.count;
      ctx.result.summary["identity_ratio"] = div.ratio;
      ctx.result.summary["silhouette"] = div.silhouette;
    }

    ctx.stage = "comparison";
    MethodEntry run_entry;
    run_entry.name = "this-run";
    run_entry.metrics.identity_distance[ctx.backend->id()] = MeanStd{mean, stddev};
    if (roc.has_value()) {
      run_entry.metrics.auc[ctx.backend->id()] = roc->auc;
      run_entry.metrics.accuracy[ctx.backend->id()] = roc->best_accuracy;
    }
    if (rank.has_value()) run_entry.metrics.rank = MeanStd{rank->mean, rank->stddev};
    const ComparisonTables run_tables = compare_methods({run_entry});
    ctx.save_csv("comparison_distance.csv", run_tables.distance);
    ctx.save_csv("comparison_auc.csv", run_tables.auc);
    ctx.save_csv("comparison_accuracy.csv", run_tables.accuracy);
    ctx.save_csv("comparison_rank.csv", run_tables.rank);
    // Published full-scale numbers use different embedders, so they get their
    // own table instead of a row that would fake comparability.
    const ComparisonTables ref_tables = compare_methods({full_scale_reference()});
    ctx.save_csv("reference_distance.csv", ref_tables.distance);
    ctx.save_csv("reference_auc.csv", ref_tables.auc);

    ctx.stage = "summary";
    nlohmann::ordered_json report = ctx.result.summary;
    report["images"] = ids.size();
    report["theta"] = cfg.metric.theta;
    ctx.save_json("evaluation.json", report);
  });
}

}  // namespace idveil
