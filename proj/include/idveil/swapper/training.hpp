#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "idveil/anon/mask_anon.hpp"
#include "idveil/backend/backend.hpp"
#include "idveil/swapper/network.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// One supervised example: swapper inputs, the target latent produced by the
// mask-based pipeline, and the cached source identity for the loss.
struct GroundTruthPair {
  LatentCode l_source;
  LatentCode l_random;
  LatentCode t_truth;
  IdentityEmbedding source_embed;
  std::string source_id;
  std::uint64_t seed = 0;
};

struct GroundTruthSet {
  std::vector<GroundTruthPair> pairs;
  std::vector<std::string> skipped;  // one note per dropped (image, seed)
};

// Builds training targets by running the mask-based anonymizer over every
// (image, seed) combination and encoding the result. Images the backend fails
// on are skipped with a note instead of aborting the whole build.
inline GroundTruthSet build_ground_truth(const std::vector<Image>& images,
                                         const std::vector<std::string>& image_ids,
                                         const std::vector<std::uint64_t>& seeds,
                                         const LatentMask& identity_mask, const Backend& backend,
                                         const RegionSet& regions = {SwapRegion::face}) {
  if (images.empty()) throw std::invalid_argument("ground truth: no images");
  if (!image_ids.empty() && image_ids.size() != images.size()) {
    throw std::invalid_argument("ground truth: id list does not match image list");
  }
  if (seeds.empty()) throw std::invalid_argument("ground truth: no seeds");
  if (regions.empty()) throw std::invalid_argument("ground truth: empty region set");
  GroundTruthSet out;
  out.pairs.reserve(images.size() * seeds.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string id =
        image_ids.empty() ? "image_" + std::to_string(i) : image_ids[i];
    for (std::uint64_t seed : seeds) {
      try {
        GroundTruthPair pair;
        pair.l_source = backend.encode(images[i]);
        pair.l_random = backend.sample_random_latent(seed);
        pair.t_truth =
            backend.encode(anonymize_masked(images[i], regions, seed, identity_mask, backend));
        pair.source_embed = backend.embed_identity(images[i]);
        pair.source_id = id;
        pair.seed = seed;
        out.pairs.push_back(std::move(pair));
      } catch (const std::exception& e) {
        out.skipped.push_back(id + " seed " + std::to_string(seed) + ": " + e.what());
      }
    }
  }
  return out;
}

struct TrainingConfig {
  double lambda_l2 = 1.0;
  double lambda_id = 0.1;
  double learning_rate = 0.1;
  double split = 0.9;
  int epochs = 30;
  int batch_size = 16;
  // Default sign penalizes similarity to the source, which is what pushes the
  // anonymized identity away. The alternative flips the term's sign.
  bool penalize_similarity = true;
  // The latent term is a sum of absolute differences by default; this
  // switches it to squared differences.
  bool latent_l2 = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (lambda_l2 < 0.0 || lambda_id < 0.0) {
      throw std::invalid_argument("training config: loss weights must be non-negative");
    }
    if (!(learning_rate > 0.0)) throw std::invalid_argument("training config: learning rate must be positive");
    if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("training config: split must be in (0,1)");
    if (epochs < 1) throw std::invalid_argument("training config: epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("training config: batch size must be at least 1");
  }
};

struct LossBreakdown {
  double total = 0.0;
  double latent_term = 0.0;
  double identity_term = 0.0;
};

// Loss of one forward result against its ground truth. With grad_accum given,
// also backpropagates into the parameter gradient accumulator.
inline LossBreakdown swapper_loss(const SwapperNetwork& net, const ForwardTrace& trace,
                                  const GroundTruthPair& pair, const Backend& backend,
                                  const TrainingConfig& cfg,
                                  std::vector<double>* grad_accum = nullptr) {
  const LatentCode& l_hat = trace.l_hat;
  LossBreakdown loss;
  LatentCode dloss_dlhat = grad_accum ? LatentCode(l_hat.layers(), l_hat.channels()) : LatentCode();

  double latent_sum = 0.0;
  for (std::size_t i = 0; i < l_hat.values().size(); ++i) {
    const double d = l_hat.values()[i] - pair.t_truth.values()[i];
    if (cfg.latent_l2) {
      latent_sum += d * d;
      if (grad_accum) dloss_dlhat.values()[i] = cfg.lambda_l2 * 2.0 * d;
    } else {
      latent_sum += std::fabs(d);
      if (grad_accum) dloss_dlhat.values()[i] = cfg.lambda_l2 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
  }
  loss.latent_term = cfg.lambda_l2 * latent_sum;

  const double id_sign = cfg.penalize_similarity ? 1.0 : -1.0;
  if (cfg.lambda_id > 0.0) {
    LatentCode dcos;
    const double cos = backend.identity_similarity_grad(l_hat, pair.source_embed,
                                                        grad_accum ? &dcos : nullptr);
    loss.identity_term = id_sign * cfg.lambda_id * cos;
    if (grad_accum) {
      for (std::size_t i = 0; i < dloss_dlhat.values().size(); ++i) {
        dloss_dlhat.values()[i] += id_sign * cfg.lambda_id * dcos.values()[i];
      }
    }
  }
  loss.total = loss.latent_term + loss.identity_term;

  if (grad_accum) {
    // Chain through the blend: d l_hat / d alpha = l_source - l_random.
    LatentCode dloss_dalpha(l_hat.layers(), l_hat.channels());
    for (std::size_t i = 0; i < dloss_dalpha.values().size(); ++i) {
      dloss_dalpha.values()[i] =
          dloss_dlhat.values()[i] * (pair.l_source.values()[i] - pair.l_random.values()[i]);
    }
    net.accumulate_gradient(trace, dloss_dalpha, *grad_accum);
  }
  return loss;
}

inline LossBreakdown swapper_loss(const SwapperNetwork& net, const GroundTruthPair& pair,
                                  const Backend& backend, const TrainingConfig& cfg) {
  return swapper_loss(net, net.forward(pair.l_source, pair.l_random), pair, backend, cfg);
}

// Deterministic shuffled split into train and held-out parts. The train part
// gets floor(n * split) pairs.
inline std::pair<std::vector<GroundTruthPair>, std::vector<GroundTruthPair>> split_ground_truth(
    std::vector<GroundTruthPair> pairs, double split, std::uint64_t seed) {
  if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("split must be in (0,1)");
  Rng rng(derive_seed(seed, 0x5b717));
  rng.shuffle(pairs);
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(pairs.size()) * split));
  std::vector<GroundTruthPair> test(pairs.begin() + n_train, pairs.end());
  pairs.resize(n_train);
  return {std::move(pairs), std::move(test)};
}

struct TrainingResult {
  SwapperNetwork net;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  double test_loss = 0.0;          // mean loss on the held-out split
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;

  Csv history_csv() const {
    Csv csv({"epoch", "loss"});
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
      csv.add_row({csv_num(e + 1), csv_num(epoch_loss[e])});
    }
    return csv;
  }
};

// Minibatch gradient descent on the swapper loss. The incoming pairs are
// split internally; the held-out part only ever sees forward passes.
inline TrainingResult train_swapper(const SwapperConfig& net_cfg, const TrainingConfig& cfg,
                                    const std::vector<GroundTruthPair>& all_pairs,
                                    const Backend& backend) {
  cfg.validate();
  if (all_pairs.empty()) throw std::invalid_argument("train: no ground truth pairs");
  if (cfg.lambda_id > 0.0 && !backend.supports_identity_gradient()) {
    throw BackendError("backend '" + backend.id() +
                       "' cannot train with a nonzero identity weight (no gradient path)");
  }
  auto [train, test] = split_ground_truth(all_pairs, cfg.split, cfg.seed);
  if (train.empty()) throw std::invalid_argument("train: split left no training pairs");

  TrainingResult result{SwapperNetwork(net_cfg, cfg.seed), {}, 0.0, train.size(), test.size()};
  SwapperNetwork& net = result.net;
  Rng order_rng(derive_seed(cfg.seed, 0x0bdeb));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad(net.parameter_count());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const GroundTruthPair& pair = train[order[i]];
        const ForwardTrace trace = net.forward(pair.l_source, pair.l_random);
        epoch_sum += swapper_loss(net, trace, pair, backend, cfg, &grad).total;
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t p = 0; p < grad.size(); ++p) net.parameters()[p] -= scale * grad[p];
    }
    const double mean_loss = epoch_sum / static_cast<double>(train.size());
    if (!std::isfinite(mean_loss)) {
      throw TrainingDiverged("training loss became non-finite in epoch " +
                             std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(mean_loss);
  }

  double test_sum = 0.0;
  for (const GroundTruthPair& pair : test) {
    test_sum += swapper_loss(net, pair, backend, cfg).total;
  }
  result.test_loss = test.empty() ? 0.0 : test_sum / static_cast<double>(test.size());
  return result;
}

// Applies a trained swapper to one image.
inline Image anonymize_with_swapper(const SwapperNetwork& net, const Image& source,
                                    std::uint64_t seed, const Backend& backend) {
  const LatentCode l_source = backend.encode(source);
  const LatentCode l_random = backend.sample_random_latent(seed);
  return backend.generate(net.forward(l_source, l_random).l_hat);
}

}  // namespace idveil
