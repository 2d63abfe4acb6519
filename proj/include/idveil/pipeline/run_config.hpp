#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "idveil/anon/mask_anon.hpp"
#include "idveil/backend/backend.hpp"
#include "idveil/backend/onnx_backend.hpp"
#include "idveil/backend/synthetic.hpp"
#include "idveil/core/image.hpp"
#include "idveil/metrics/disent.hpp"
#include "idveil/util/kv_config.hpp"

namespace idveil {

// Builds the backend named by a spec string: "synthetic" for the default
// planted world, "synthetic:<kv-file>" for a configured one, and
// "onnx:<descriptor.json>" for an external model bundle.
inline std::unique_ptr<Backend> make_backend(const std::string& spec) {
  if (spec == "synthetic") {
    return std::make_unique<SyntheticWorld>(SyntheticWorldConfig::defaults());
  }
  const auto colon = spec.find(':');
  const std::string kind = colon == std::string::npos ? spec : spec.substr(0, colon);
  const std::string path = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "synthetic") {
    if (path.empty()) throw ConfigError("backend spec 'synthetic:' is missing its config path");
    return std::make_unique<SyntheticWorld>(
        SyntheticWorldConfig::from_kv(KvConfig::parse_file(path)));
  }
  if (kind == "onnx") {
    if (path.empty()) throw ConfigError("backend spec 'onnx:' is missing its descriptor path");
    return std::make_unique<OnnxBackend>(OnnxBackend::load(path));
  }
  throw ConfigError("unknown backend spec '" + spec +
                    "' (expected synthetic, synthetic:<file> or onnx:<file>)");
}

// An empty list (or the word "none") is a valid choice: it turns the mask
// pipeline into a pass-through that copies each image unchanged.
inline RegionSet parse_region_set(const std::string& spec) {
  if (detail::trim(spec) == "none") return {};
  RegionSet out;
  std::istringstream is(spec);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = detail::trim(tok);
    if (tok.empty()) continue;
    out.insert(swap_region_from_name(tok));
  }
  return out;
}

// Everything a workflow run needs, read from one flat key-value file with
// command-line overrides already folded in. See RunConfig::from_kv for the
// schema; `raw` keeps the merged key-value pairs for the run-metadata record.
struct RunConfig {
  std::string backend_spec = "synthetic";
  std::string data_dir;
  std::string labels_path;  // empty means unlabeled
  std::string out_dir = "out";
  std::string mode = "layers";  // layers | channels | mask | swapper
  std::uint64_t seed = 1;
  int workers = 1;

  MetricConfig metric;  // alpha, beta, gamma (target distance), theta

  // search
  std::vector<int> window_lengths = {1, 2, 3};
  int greedy_k = 0;  // 0 skips the greedy layer stage
  std::vector<int> scan_layers;  // empty scans every layer
  int block_size = 32;
  std::optional<int> channel_budget;
  std::optional<double> distance_threshold;

  // anonymization
  std::vector<int> anon_layers;  // layers mode: empty means take the search result
  std::string regions = "face";
  bool color_match = false;
  std::string donor = "random_latent";

  // swapper
  int swapper_epochs = 30;
  double swapper_lr = 0.1;
  double lambda_l2 = 1.0;
  double lambda_id = 0.0;
  int swapper_hidden = 0;  // 0 picks the backend channel count
  int swapper_donors = 8;  // donor seeds per source image
  double swapper_split = 0.9;
  int swapper_batch = 16;

  // evaluation
  std::string eval_anon_dir;  // empty means <out_dir>/anon
  std::vector<int> k_grid = {2, 3, 4, 5};

  std::map<std::string, std::string> raw;

  static RunConfig from_kv(const KvConfig& kv) {
    RunConfig cfg;
    cfg.backend_spec = kv.get("backend", cfg.backend_spec);
    cfg.data_dir = kv.get("data_dir", cfg.data_dir);
    cfg.labels_path = kv.get("labels", cfg.labels_path);
    cfg.out_dir = kv.get("out_dir", cfg.out_dir);
    cfg.mode = kv.get("mode", cfg.mode);
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(cfg.seed)));
    cfg.workers = static_cast<int>(kv.get_int("workers", cfg.workers));

    cfg.metric.alpha = kv.get_double("metric.alpha", cfg.metric.alpha);
    cfg.metric.beta = kv.get_double("metric.beta", cfg.metric.beta);
    cfg.metric.gamma = kv.get_double("metric.gamma", cfg.metric.gamma);
    cfg.metric.theta = kv.get_double("metric.theta", cfg.metric.theta);
    cfg.metric.attr_logit = kv.get_bool("metric.attr_logit", cfg.metric.attr_logit);

    cfg.window_lengths = kv.get_int_list("search.windows", cfg.window_lengths);
    cfg.greedy_k = static_cast<int>(kv.get_int("search.greedy_k", cfg.greedy_k));
    cfg.scan_layers = kv.get_int_list("search.layers", cfg.scan_layers);
    cfg.block_size = static_cast<int>(kv.get_int("search.block_size", cfg.block_size));
    if (kv.has("search.budget")) {
      cfg.channel_budget = static_cast<int>(kv.get_int("search.budget", 0));
    }
    if (kv.has("search.threshold")) {
      cfg.distance_threshold = kv.get_double("search.threshold", 0.0);
    }

    cfg.anon_layers = kv.get_int_list("anon.layers", cfg.anon_layers);
    cfg.regions = kv.get("anon.regions", cfg.regions);
    cfg.color_match = kv.get_bool("anon.color_match", cfg.color_match);
    cfg.donor = kv.get("anon.donor", cfg.donor);

    cfg.swapper_epochs = static_cast<int>(kv.get_int("swapper.epochs", cfg.swapper_epochs));
    cfg.swapper_lr = kv.get_double("swapper.learning_rate", cfg.swapper_lr);
    cfg.lambda_l2 = kv.get_double("swapper.lambda_l2", cfg.lambda_l2);
    cfg.lambda_id = kv.get_double("swapper.lambda_id", cfg.lambda_id);
    cfg.swapper_hidden = static_cast<int>(kv.get_int("swapper.hidden", cfg.swapper_hidden));
    cfg.swapper_donors = static_cast<int>(kv.get_int("swapper.donors", cfg.swapper_donors));
    cfg.swapper_split = kv.get_double("swapper.split", cfg.swapper_split);
    cfg.swapper_batch = static_cast<int>(kv.get_int("swapper.batch", cfg.swapper_batch));

    cfg.eval_anon_dir = kv.get("eval.anon_dir", cfg.eval_anon_dir);
    cfg.k_grid = kv.get_int_list("eval.k_grid", cfg.k_grid);

    cfg.raw = kv.entries();
    return cfg;
  }

  std::filesystem::path anon_output_dir() const {
    return eval_anon_dir.empty() ? std::filesystem::path(out_dir) / "anon"
                                 : std::filesystem::path(eval_anon_dir);
  }

  // Checks invariants and path existence. Runs before any output is written,
  // so a bad config never leaves partial artifacts behind.
  void validate() const {
    namespace fs = std::filesystem;
    metric.validate();
    if (mode != "layers" && mode != "channels" && mode != "mask" && mode != "swapper") {
      throw ConfigError("mode must be layers, channels, mask or swapper, got '" + mode + "'");
    }
    if (data_dir.empty()) throw ConfigError("data_dir is required");
    if (!fs::exists(data_dir) || !fs::is_directory(data_dir)) {
      throw ConfigError("data_dir " + data_dir + " does not exist");
    }
    if (!labels_path.empty() && !fs::exists(labels_path)) {
      throw ConfigError("labels file " + labels_path + " does not exist");
    }
    const auto colon = backend_spec.find(':');
    if (colon != std::string::npos) {
      const std::string path = backend_spec.substr(colon + 1);
      if (path.empty() || !fs::exists(path)) {
        throw ConfigError("backend file " + path + " does not exist");
      }
    }
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (!(metric.gamma >= 0.0)) throw ConfigError("metric.gamma must be non-negative");
    if (!(metric.theta > 0.0 && metric.theta < 1.0)) {
      throw ConfigError("metric.theta must lie in (0,1)");
    }
    if (block_size < 1) throw ConfigError("search.block_size must be positive");
    if (channel_budget && *channel_budget < 1) {
      throw ConfigError("search.budget must be positive");
    }
    if (distance_threshold && !(*distance_threshold >= 0.0)) {
      throw ConfigError("search.threshold must be non-negative");
    }
    if (greedy_k < 0) throw ConfigError("search.greedy_k must be non-negative");
    if (swapper_epochs < 1) throw ConfigError("swapper.epochs must be positive");
    if (swapper_donors < 1) throw ConfigError("swapper.donors must be positive");
    if (!(swapper_split > 0.0 && swapper_split < 1.0)) {
      throw ConfigError("swapper.split must lie in (0,1)");
    }
    if (swapper_batch < 1) throw ConfigError("swapper.batch must be positive");
    RegionSet parsed;
    try {
      parsed = parse_region_set(regions);
      donor_source_from_name(donor);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (mode == "swapper" && parsed.empty()) {
      throw ConfigError("swapper mode needs at least one region in anon.regions");
    }
  }
};

}  // namespace idveil
