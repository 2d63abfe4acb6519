#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idveil/backend/backend.hpp"
#include "idveil/core/errors.hpp"
#include "idveil/onnx/executor.hpp"
#include "idveil/onnx/model.hpp"
#include "idveil/util/rng.hpp"

namespace idveil {

// Backend adapter over externally trained models. A bundle is a directory
// holding one JSON descriptor plus one serialized model file per component:
//
//   {
//     "format": "idveil-backend-bundle",
//     "name": "demo",
//     "n_layers": 18, "n_channels": 512,
//     "image_width": 256, "image_height": 256, "image_channels": 3,
//     "embed_dim": 512, "n_attributes": 40,
//     "z_dim": 512,
//     "normalize_embeddings": true,
//     "components": { "generator": "generator.onnx", ... }
//   }
//
// Component paths are relative to the descriptor file. Every component is
// optional; calling an operation whose component is absent raises
// BackendError, so partial bundles still serve the workflows they cover.
// Inference runs in float32 as the files dictate, and results are widened
// back to double at the interface boundary.
class OnnxBackend final : public Backend {
 public:
  static OnnxBackend load(const std::filesystem::path& descriptor_path) {
    namespace fs = std::filesystem;
    std::ifstream is(descriptor_path);
    if (!is) throw IoError(descriptor_path.string() + ": cannot open");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const std::exception& e) {
      throw IoError(descriptor_path.string() + ": invalid JSON (" + e.what() + ")");
    }

    auto bundle = std::make_shared<Bundle>();
    try {
      if (j.at("format") != "idveil-backend-bundle") {
        throw IoError("unrecognized bundle format");
      }
      bundle->name = j.at("name").get<std::string>();
      auto& s = bundle->shape;
      s.n_layers = read_positive(j, "n_layers");
      s.n_channels = read_positive(j, "n_channels");
      s.image_width = read_positive(j, "image_width");
      s.image_height = read_positive(j, "image_height");
      s.image_channels = read_positive(j, "image_channels");
      s.embed_dim = read_positive(j, "embed_dim");
      s.n_attributes = read_positive(j, "n_attributes");
      bundle->normalize_embeddings = j.value("normalize_embeddings", true);
      if (j.contains("z_dim")) bundle->z_dim = read_positive(j, "z_dim");

      const fs::path dir = descriptor_path.parent_path();
      const auto components = j.value("components", nlohmann::json::object());
      load_component(components, "generator", dir, bundle->generator);
      load_component(components, "encoder", dir, bundle->encoder);
      load_component(components, "mapper", dir, bundle->mapper);
      load_component(components, "identity", dir, bundle->identity);
      load_component(components, "attributes", dir, bundle->attributes);
      load_component(components, "parser", dir, bundle->parser);
      if (bundle->mapper.has_value() && bundle->z_dim <= 0) {
        throw IoError("bundle declares a mapper component but no z_dim");
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(descriptor_path.string() + ": bad descriptor (" + e.what() + ")");
    } catch (const IoError& e) {
      throw IoError(descriptor_path.string() + ": " + e.what());
    }
    return OnnxBackend(std::move(bundle));
  }

  const ShapeDescriptor& shape() const override { return bundle_->shape; }

  std::string id() const override { return "onnx:" + bundle_->name; }

  Image generate(const LatentCode& latent) const override {
    require_latent_shape(latent);
    const auto& s = bundle_->shape;
    const auto out = run(bundle_->generator, "generator",
                         onnx::Value::row(narrow(latent.values())),
                         static_cast<std::size_t>(s.image_width) * s.image_height * s.image_channels);
    Image im = Image::zeros(s.image_width, s.image_height, s.image_channels);
    for (std::size_t i = 0; i < out.size(); ++i) im.data[i] = out[i];
    return im;
  }

  LatentCode encode(const Image& image) const override {
    require_image_dims(image);
    const auto& s = bundle_->shape;
    auto out = run(bundle_->encoder, "encoder", onnx::Value::row(narrow(image.data)),
                   s.latent_shape().size());
    return LatentCode::from_values(s.n_layers, s.n_channels, std::move(out));
  }

  LatentCode sample_random_latent(std::uint64_t seed) const override {
    const auto& s = bundle_->shape;
    Rng rng(derive_seed(kSampleStream, seed));
    if (!bundle_->mapper.has_value()) {
      // Without a mapper net the latent is drawn directly in W, one standard
      // normal per coordinate.
      std::vector<double> v(s.latent_shape().size());
      for (double& x : v) x = rng.next_normal();
      return LatentCode::from_values(s.n_layers, s.n_channels, std::move(v));
    }
    std::vector<float> z(static_cast<std::size_t>(bundle_->z_dim));
    for (float& x : z) x = static_cast<float>(rng.next_normal());
    auto out = run(bundle_->mapper, "mapper", onnx::Value::row(std::move(z)),
                   s.latent_shape().size());
    return LatentCode::from_values(s.n_layers, s.n_channels, std::move(out));
  }

  IdentityEmbedding embed_identity(const Image& image) const override {
    require_image_dims(image);
    IdentityEmbedding e;
    e.values = run(bundle_->identity, "identity", onnx::Value::row(narrow(image.data)),
                   static_cast<std::size_t>(bundle_->shape.embed_dim));
    if (bundle_->normalize_embeddings) e = normalize(std::move(e));
    return e;
  }

  AttributeVector predict_attributes(const Image& image) const override {
    require_image_dims(image);
    AttributeVector a;
    a.values = run(bundle_->attributes, "attributes", onnx::Value::row(narrow(image.data)),
                   static_cast<std::size_t>(bundle_->shape.n_attributes));
    for (double v : a.values) {
      if (!(v > 0.0 && v < 1.0)) {
        throw BackendError(id() + ": attribute classifier produced " + std::to_string(v) +
                           ", outside (0,1)");
      }
    }
    return a;
  }

  SegmentationMask parse_mask(const Image& image) const override {
    require_image_dims(image);
    const auto& s = bundle_->shape;
    const auto plane = static_cast<std::size_t>(s.image_width) * s.image_height;
    const auto scores = run(bundle_->parser, "parser", onnx::Value::row(narrow(image.data)),
                            plane * kRegionCount);
    // Scores are region-major planes; each pixel takes the best-scoring
    // region, lowest label on ties.
    SegmentationMask mask(s.image_width, s.image_height);
    for (std::size_t p = 0; p < plane; ++p) {
      int best = 0;
      double best_score = scores[p];
      for (int r = 1; r < kRegionCount; ++r) {
        const double score = scores[static_cast<std::size_t>(r) * plane + p];
        if (score > best_score) {
          best = r;
          best_score = score;
        }
      }
      mask.set(static_cast<int>(p % s.image_width), static_cast<int>(p / s.image_width),
               static_cast<Region>(best));
    }
    return mask;
  }

  std::unique_ptr<Backend> clone() const override {
    // Model weights are immutable after load, so clones share the bundle;
    // each instance still honors the one-call-in-flight rule on its own.
    return std::unique_ptr<Backend>(new OnnxBackend(bundle_));
  }

 private:
  struct Bundle {
    ShapeDescriptor shape;
    std::string name;
    bool normalize_embeddings = true;
    int z_dim = 0;
    std::optional<onnx::Executor> generator;
    std::optional<onnx::Executor> encoder;
    std::optional<onnx::Executor> mapper;
    std::optional<onnx::Executor> identity;
    std::optional<onnx::Executor> attributes;
    std::optional<onnx::Executor> parser;
  };

  static constexpr std::uint64_t kSampleStream = 0xb0de5eed;

  explicit OnnxBackend(std::shared_ptr<const Bundle> bundle) : bundle_(std::move(bundle)) {}

  static int read_positive(const nlohmann::json& j, const char* key) {
    const int v = j.at(key).get<int>();
    if (v <= 0) throw IoError(std::string("descriptor field ") + key + " must be positive");
    return v;
  }

  static void load_component(const nlohmann::json& components, const char* key,
                             const std::filesystem::path& dir,
                             std::optional<onnx::Executor>& slot) {
    if (!components.contains(key)) return;
    const auto rel = components.at(key).get<std::string>();
    slot.emplace(onnx::load_model(dir / rel));
  }

  static std::vector<float> narrow(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
  }

  std::vector<double> run(const std::optional<onnx::Executor>& component, const char* what,
                          onnx::Value input, std::size_t expected) const {
    if (!component.has_value()) {
      throw BackendError(id() + ": bundle has no " + std::string(what) + " component");
    }
    const onnx::Value out = component->run_single(std::move(input));
    if (out.size() != expected) {
      throw BackendError(id() + ": " + what + " produced " + std::to_string(out.size()) +
                         " values, expected " + std::to_string(expected));
    }
    std::vector<double> wide(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!std::isfinite(out.data[i])) {
        throw BackendError(id() + ": " + what + " produced a non-finite value");
      }
      wide[i] = out.data[i];
    }
    return wide;
  }

  std::shared_ptr<const Bundle> bundle_;
};

}  // namespace idveil
