#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "idveil/backend/backend.hpp"
#include "idveil/backend/coords.hpp"
#include "idveil/util/kv_config.hpp"
#include "idveil/util/rng.hpp"

namespace idveil {

// Configuration of a synthetic desk-scale world. The world plants where
// identity and each attribute live in the latent space, which gives search
// and anonymization tests an exact ground truth to recover.
struct SyntheticWorldConfig {
  std::uint64_t seed = 17;
  int n_layers = 18;
  int n_channels = 512;
  double noise_scale = 0.0;
  bool normalize_embeddings = true;
  LatentCoordSet identity;
  std::vector<LatentCoordSet> attributes;

  // Identity on the full middle layers 5..9; attributes in blocks of eight
  // channels, round-robin over the remaining layers.
  static SyntheticWorldConfig defaults(int layers = 18, int channels = 512,
                                       std::uint64_t seed = 17) {
    SyntheticWorldConfig cfg;
    cfg.seed = seed;
    cfg.n_layers = layers;
    cfg.n_channels = channels;
    cfg.identity = LatentCoordSet::full_layers({5, 6, 7, 8, 9}, channels);
    cfg.attributes = auto_attributes(cfg, 40, 8);
    return cfg;
  }

  // Places `count` attribute carriers of `width` channels each on the layers
  // not used by the identity set, pairwise disjoint.
  static std::vector<LatentCoordSet> auto_attributes(const SyntheticWorldConfig& cfg,
                                                     int count, int width) {
    std::vector<int> free_layers;
    const LayerSet id_layers = cfg.identity.layers();
    for (int l = 0; l < cfg.n_layers; ++l) {
      if (!id_layers.contains(l)) free_layers.push_back(l);
    }
    if (free_layers.empty()) {
      throw ConfigError("synthetic world: no attribute layers left outside the identity set");
    }
    std::vector<LatentCoordSet> attrs;
    attrs.reserve(count);
    for (int j = 0; j < count; ++j) {
      const int layer = free_layers[j % free_layers.size()];
      const int start = width * (j / static_cast<int>(free_layers.size()));
      if (start + width > cfg.n_channels) {
        throw ConfigError("synthetic world: channels too few for " + std::to_string(count) +
                          " attributes of width " + std::to_string(width));
      }
      attrs.push_back(LatentCoordSet({{layer, start, start + width - 1}}));
    }
    return attrs;
  }

  // Keys: synthetic.seed, synthetic.layers, synthetic.channels,
  // synthetic.noise, synthetic.normalize, synthetic.identity (coord set),
  // synthetic.attributes ("auto:COUNTxWIDTH" or explicit synthetic.attr.N).
  static SyntheticWorldConfig from_kv(const KvConfig& kv) {
    SyntheticWorldConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("synthetic.seed", 17));
    cfg.n_layers = static_cast<int>(kv.get_int("synthetic.layers", 18));
    cfg.n_channels = static_cast<int>(kv.get_int("synthetic.channels", 512));
    cfg.noise_scale = kv.get_double("synthetic.noise", 0.0);
    cfg.normalize_embeddings = kv.get_bool("synthetic.normalize", true);
    if (cfg.n_layers <= 0 || cfg.n_channels <= 0) {
      throw ConfigError("synthetic world: layers and channels must be positive");
    }
    if (cfg.noise_scale < 0.0) throw ConfigError("synthetic world: negative noise scale");
    if (kv.has("synthetic.identity")) {
      cfg.identity = LatentCoordSet::parse(kv.get("synthetic.identity"));
    } else {
      cfg.identity = LatentCoordSet::full_layers({5, 6, 7, 8, 9}, cfg.n_channels);
    }
    const std::string spec = kv.get("synthetic.attributes", "auto:40x8");
    if (spec.rfind("auto:", 0) == 0) {
      const auto x = spec.find('x', 5);
      if (x == std::string::npos) throw ConfigError("synthetic.attributes: expected auto:COUNTxWIDTH");
      cfg.attributes = auto_attributes(cfg, std::stoi(spec.substr(5, x - 5)),
                                       std::stoi(spec.substr(x + 1)));
    } else if (spec == "explicit") {
      for (int j = 0; kv.has("synthetic.attr." + std::to_string(j)); ++j) {
        cfg.attributes.push_back(LatentCoordSet::parse(kv.get("synthetic.attr." + std::to_string(j))));
      }
      if (cfg.attributes.empty()) throw ConfigError("synthetic.attributes=explicit but no synthetic.attr.N keys");
    } else {
      throw ConfigError("synthetic.attributes: expected auto:COUNTxWIDTH or explicit");
    }
    return cfg;
  }

  void validate() const {
    const LatentShape shape{n_layers, n_channels};
    identity.require_within(shape, "synthetic identity set");
    if (identity.empty()) throw ConfigError("synthetic world: empty identity set");
    if (attributes.empty()) throw ConfigError("synthetic world: no attributes");
    std::vector<bool> taken(shape.size(), false);
    for (std::size_t j = 0; j < attributes.size(); ++j) {
      attributes[j].require_within(shape, "synthetic attribute set " + std::to_string(j));
      for (const auto& [l, c] : attributes[j].coords()) {
        const std::size_t idx = static_cast<std::size_t>(l) * n_channels + c;
        if (taken[idx]) {
          throw ConfigError("synthetic world: attribute sets overlap at layer " +
                            std::to_string(l) + " channel " + std::to_string(c));
        }
        taken[idx] = true;
      }
    }
  }
};

// Linear toy generator with an exactly invertible forward map.
//
// Each latent layer renders to one pixel row of the image. Within a row, the
// generator permutes channels and multiplies by a signed power-of-two gain,
// so encode(generate(L)) reproduces L bit for bit in IEEE arithmetic (with
// zero observation noise). That exactness is what lets planted-truth tests
// assert set equality instead of tolerances. The map is linear and has full
// column rank, so the encoder is its (pseudo) inverse.
//
// The toy mask parser assigns a fixed canonical face layout: horizontal bands
// of background, hair, skin, eyes, nose, mouth, skin, other, background from
// top to bottom. Regions therefore cover whole latent layers, mirroring the
// way spatially localized facial features concentrate in specific layers of
// the reference generator.
class SyntheticWorld final : public Backend {
 public:
  explicit SyntheticWorld(SyntheticWorldConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    shape_.n_layers = cfg_.n_layers;
    shape_.n_channels = cfg_.n_channels;
    shape_.image_width = cfg_.n_channels;
    shape_.image_height = cfg_.n_layers;
    shape_.image_channels = 1;
    id_coords_ = cfg_.identity.coords();
    shape_.embed_dim = static_cast<int>(id_coords_.size());
    shape_.n_attributes = static_cast<int>(cfg_.attributes.size());
    attr_coords_.reserve(cfg_.attributes.size());
    for (const auto& a : cfg_.attributes) attr_coords_.push_back(a.coords());
    build_world();
  }

  const ShapeDescriptor& shape() const override { return shape_; }
  const SyntheticWorldConfig& config() const { return cfg_; }

  std::string id() const override {
    const std::string desc = cfg_.identity.str() + "|" + std::to_string(cfg_.seed) + "|" +
                             std::to_string(cfg_.noise_scale) + "|" +
                             std::to_string(cfg_.attributes.size());
    char hash[20];
    std::snprintf(hash, sizeof hash, "%08llx",
                  static_cast<unsigned long long>(fnv1a(desc.data(), desc.size()) & 0xffffffffULL));
    return "synthetic-" + std::to_string(cfg_.n_layers) + "x" +
           std::to_string(cfg_.n_channels) + "-" + hash;
  }

  Image generate(const LatentCode& latent) const override {
    require_latent_shape(latent);
    Image im = Image::zeros(shape_.image_width, shape_.image_height, 1);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const double* row = latent.row(l);
      for (int ch = 0; ch < cfg_.n_channels; ++ch) {
        const int col = perm_[l][ch];
        im.px(col, l) = gain_[idx(l, col)] * row[ch];
      }
    }
    if (cfg_.noise_scale > 0.0) {
      Rng noise(fnv1a(latent.values()) ^ cfg_.seed);
      for (double& p : im.data) p += cfg_.noise_scale * noise.next_normal();
    }
    return im;
  }

  LatentCode encode(const Image& image) const override {
    require_image_dims(image);
    LatentCode latent(cfg_.n_layers, cfg_.n_channels);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      double* row = latent.row(l);
      for (int ch = 0; ch < cfg_.n_channels; ++ch) {
        const int col = perm_[l][ch];
        row[ch] = image.px(col, l) / gain_[idx(l, col)];
      }
    }
    return latent;
  }

  LatentCode sample_random_latent(std::uint64_t seed) const override {
    Rng rng(derive_seed(cfg_.seed, seed));
    LatentCode latent(cfg_.n_layers, cfg_.n_channels);
    auto& v = latent.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = mean_[i] + sigma_[i] * rng.next_normal();
    }
    return latent;
  }

  IdentityEmbedding embed_identity(const Image& image) const override {
    const LatentCode latent = encode(image);
    IdentityEmbedding e;
    e.values.reserve(id_coords_.size());
    for (const auto& [l, c] : id_coords_) e.values.push_back(latent.at(l, c));
    return cfg_.normalize_embeddings ? normalize(std::move(e)) : e;
  }

  AttributeVector predict_attributes(const Image& image) const override {
    const LatentCode latent = encode(image);
    AttributeVector a;
    a.values.reserve(attr_coords_.size());
    for (const auto& coords : attr_coords_) {
      double sum = 0.0;
      for (const auto& [l, c] : coords) sum += latent.at(l, c);
      a.values.push_back(logistic(sum / static_cast<double>(coords.size())));
    }
    return a;
  }

  SegmentationMask parse_mask(const Image& image) const override {
    require_image_dims(image);
    SegmentationMask seg(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
      const Region r = canonical_row_label(y, image.height);
      for (int x = 0; x < image.width; ++x) seg.set(x, y, r);
    }
    return seg;
  }

  std::unique_ptr<Backend> clone() const override {
    return std::make_unique<SyntheticWorld>(*this);
  }

  bool supports_identity_gradient() const override { return cfg_.noise_scale == 0.0; }

  // cos(e(latent), reference) where e reads the planted identity coordinates
  // of the latent directly; with zero noise this equals the full
  // embed_identity(generate(latent)) path because the round trip is exact.
  // Cosine is scale invariant, so the embedder's normalization flag does not
  // change the value.
  double identity_similarity_grad(const LatentCode& latent, const IdentityEmbedding& reference,
                                  LatentCode* grad_out) const override {
    if (!supports_identity_gradient()) {
      throw BackendError("synthetic identity gradient requires zero observation noise");
    }
    require_latent_shape(latent);
    if (reference.values.size() != id_coords_.size()) {
      throw std::invalid_argument("identity_similarity_grad: reference dimension mismatch");
    }
    std::vector<double> u(id_coords_.size());
    for (std::size_t i = 0; i < id_coords_.size(); ++i) {
      u[i] = latent.at(id_coords_[i].first, id_coords_[i].second);
    }
    const std::vector<double>& w = reference.values;
    double uu = 0.0, ww = 0.0, uw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      uu += u[i] * u[i];
      ww += w[i] * w[i];
      uw += u[i] * w[i];
    }
    const double nu = std::sqrt(uu), nw = std::sqrt(ww);
    if (grad_out) *grad_out = LatentCode(cfg_.n_layers, cfg_.n_channels);
    if (nu <= 0.0 || nw <= 0.0) return 0.0;
    const double cos_uw = uw / (nu * nw);
    if (grad_out) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double g = w[i] / (nu * nw) - cos_uw * u[i] / uu;
        grad_out->at(id_coords_[i].first, id_coords_[i].second) = g;
      }
    }
    return cos_uw;
  }

  // Stationary mean and per-coordinate deviation of the latent sampler,
  // exposed for the Monte-Carlo oracle.
  const std::vector<double>& sampler_mean() const { return mean_; }
  const std::vector<double>& sampler_sigma() const { return sigma_; }

  static Region canonical_row_label(int row, int height) {
    static constexpr Region kBands[18] = {
        Region::background, Region::background, Region::hair, Region::hair,
        Region::hair,       Region::skin,       Region::eyes, Region::nose,
        Region::mouth,      Region::skin,       Region::skin, Region::skin,
        Region::skin,       Region::skin,       Region::other, Region::other,
        Region::background, Region::background};
    if (row < 0 || row >= height) throw std::invalid_argument("canonical_row_label: bad row");
    return kBands[static_cast<int>(static_cast<long long>(row) * 18 / height)];
  }

 private:
  static double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  std::size_t idx(int layer, int col) const {
    return static_cast<std::size_t>(layer) * cfg_.n_channels + col;
  }

  void build_world() {
    Rng rng(cfg_.seed);
    const int C = cfg_.n_channels;
    perm_.resize(cfg_.n_layers);
    gain_.resize(static_cast<std::size_t>(cfg_.n_layers) * C);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      auto& p = perm_[l];
      p.resize(C);
      for (int c = 0; c < C; ++c) p[c] = c;
      rng.shuffle(p);
      for (int col = 0; col < C; ++col) {
        static constexpr double kGains[3] = {0.5, 1.0, 2.0};
        const double g = kGains[rng.next_below(3)];
        gain_[idx(l, col)] = rng.next_below(2) ? -g : g;
      }
    }
    const std::size_t n = LatentShape{cfg_.n_layers, C}.size();
    mean_.resize(n);
    sigma_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      mean_[i] = rng.next_double() - 0.5;
      sigma_[i] = 0.5 + rng.next_double();
    }
  }

  SyntheticWorldConfig cfg_;
  ShapeDescriptor shape_;
  std::vector<std::vector<int>> perm_;  // perm_[layer][channel] = image column
  std::vector<double> gain_;            // signed power-of-two gain per (layer, column)
  std::vector<double> mean_, sigma_;    // latent sampler parameters
  std::vector<std::pair<int, int>> id_coords_;
  std::vector<std::vector<std::pair<int, int>>> attr_coords_;
};

}  // namespace idveil
