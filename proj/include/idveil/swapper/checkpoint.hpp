#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "idveil/core/errors.hpp"
#include "idveil/swapper/training.hpp"

namespace idveil {

// Checkpoint layout: a JSON description (network shape, pass rules, training
// provenance) beside a little-endian float64 blob holding the flat parameter
// vector in declaration order.
struct CheckpointMeta {
  TrainingConfig training;
  std::string backend_id;
};

namespace detail {

inline void write_le_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

inline double read_le_f64(std::istream& is, const std::string& path) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
    throw IoError(path + ": truncated parameter blob");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& json_path, const std::string& blob_path,
                            const SwapperNetwork& net, const CheckpointMeta& meta) {
  const SwapperConfig& cfg = net.config();
  nlohmann::ordered_json j;
  j["format"] = "alpha-swapper-checkpoint";
  j["network"] = {{"n_layers", cfg.n_layers},
                  {"n_channels", cfg.n_channels},
                  {"hidden", cfg.hidden_dim()},
                  {"pass_layers", cfg.pass_layers.indices()},
                  {"pass_rule", pass_rule_name(cfg.pass_rule)},
                  {"parameter_count", net.parameter_count()}};
  j["training"] = {{"lambda_l2", meta.training.lambda_l2},
                   {"lambda_id", meta.training.lambda_id},
                   {"learning_rate", meta.training.learning_rate},
                   {"split", meta.training.split},
                   {"epochs", meta.training.epochs},
                   {"batch_size", meta.training.batch_size},
                   {"penalize_similarity", meta.training.penalize_similarity},
                   {"latent_l2", meta.training.latent_l2},
                   {"seed", meta.training.seed}};
  j["backend_id"] = meta.backend_id;
  std::ofstream js(json_path);
  if (!js) throw IoError(json_path + ": cannot open for writing");
  js << j.dump(2) << "\n";

  std::ofstream os(blob_path, std::ios::binary);
  if (!os) throw IoError(blob_path + ": cannot open for writing");
  for (double v : net.parameters()) detail::write_le_f64(os, v);
  if (!os) throw IoError(blob_path + ": write failed");
}

struct LoadedCheckpoint {
  SwapperNetwork net;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& json_path,
                                        const std::string& blob_path) {
  nlohmann::json j;
  {
    std::ifstream js(json_path);
    if (!js) throw IoError(json_path + ": cannot open");
    try {
      js >> j;
    } catch (const std::exception& e) {
      throw IoError(json_path + ": invalid JSON (" + e.what() + ")");
    }
  }
  try {
    if (j.at("format") != "alpha-swapper-checkpoint") {
      throw IoError(json_path + ": not a swapper checkpoint");
    }
    const auto& n = j.at("network");
    SwapperConfig cfg;
    cfg.n_layers = n.at("n_layers").get<int>();
    cfg.n_channels = n.at("n_channels").get<int>();
    cfg.hidden = n.at("hidden").get<int>();
    cfg.pass_layers = LayerSet(n.at("pass_layers").get<std::vector<int>>());
    cfg.pass_rule = pass_rule_from_name(n.at("pass_rule").get<std::string>());

    CheckpointMeta meta;
    const auto& t = j.at("training");
    meta.training.lambda_l2 = t.at("lambda_l2").get<double>();
    meta.training.lambda_id = t.at("lambda_id").get<double>();
    meta.training.learning_rate = t.at("learning_rate").get<double>();
    meta.training.split = t.at("split").get<double>();
    meta.training.epochs = t.at("epochs").get<int>();
    meta.training.batch_size = t.at("batch_size").get<int>();
    meta.training.penalize_similarity = t.at("penalize_similarity").get<bool>();
    meta.training.latent_l2 = t.at("latent_l2").get<bool>();
    meta.training.seed = t.at("seed").get<std::uint64_t>();
    meta.backend_id = j.at("backend_id").get<std::string>();

    LoadedCheckpoint loaded{SwapperNetwork(cfg, 0), std::move(meta)};
    const std::size_t want = n.at("parameter_count").get<std::size_t>();
    if (want != loaded.net.parameter_count()) {
      throw IoError(json_path + ": parameter count does not match the declared network");
    }
    std::ifstream is(blob_path, std::ios::binary);
    if (!is) throw IoError(blob_path + ": cannot open");
    for (double& v : loaded.net.parameters()) v = detail::read_le_f64(is, blob_path);
    if (is.get() != EOF) throw IoError(blob_path + ": trailing bytes after parameters");
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path + ": checkpoint field error (" + e.what() + ")");
  }
}

}  // namespace idveil
