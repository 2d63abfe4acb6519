#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "idveil/core/embedding.hpp"
#include "idveil/core/image.hpp"
#include "idveil/core/latent.hpp"

namespace idveil {

// Dimensions shared by every component of one backend bundle.
struct ShapeDescriptor {
  int n_layers = 0;
  int n_channels = 0;
  int image_width = 0;
  int image_height = 0;
  int image_channels = 0;
  int embed_dim = 0;
  int n_attributes = 0;

  LatentShape latent_shape() const { return {n_layers, n_channels}; }
};

// A bundle of model components that agree on one shape descriptor: generator,
// encoder, latent sampler, identity embedder, attribute classifier and mask
// parser. Instances are single-consumer: one in-flight call at a time. For
// parallel work, clone one instance per worker.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const ShapeDescriptor& shape() const = 0;

  // Stable identifier recorded in cache sidecars and run metadata.
  virtual std::string id() const = 0;

  virtual Image generate(const LatentCode& latent) const = 0;
  virtual LatentCode encode(const Image& image) const = 0;

  // Draws z from the seed and maps it into the latent space. Identical seeds
  // give identical codes; distinct seeds give distinct codes.
  virtual LatentCode sample_random_latent(std::uint64_t seed) const = 0;

  virtual IdentityEmbedding embed_identity(const Image& image) const = 0;
  virtual AttributeVector predict_attributes(const Image& image) const = 0;
  virtual SegmentationMask parse_mask(const Image& image) const = 0;

  virtual std::unique_ptr<Backend> clone() const = 0;

  // Optional capability: cosine similarity between the identity embedding of
  // generate(latent) and a reference embedding, together with its gradient
  // with respect to the latent. Needed to train the latent swapper with a
  // nonzero identity loss weight.
  virtual bool supports_identity_gradient() const { return false; }
  virtual double identity_similarity_grad(const LatentCode& /*latent*/,
                                          const IdentityEmbedding& /*reference*/,
                                          LatentCode* /*grad_out*/) const {
    throw BackendError("backend '" + id() + "' has no identity gradient path");
  }

 protected:
  void require_latent_shape(const LatentCode& latent) const {
    if (latent.shape() != shape().latent_shape()) {
      throw std::invalid_argument("backend '" + id() + "': latent shape " +
                                  latent.shape().str() + " does not match " +
                                  shape().latent_shape().str());
    }
  }

  void require_image_dims(const Image& image) const {
    const auto& s = shape();
    if (image.width != s.image_width || image.height != s.image_height ||
        image.channels != s.image_channels) {
      throw std::invalid_argument("backend '" + id() + "': unexpected image dimensions");
    }
  }
};

}  // namespace idveil
