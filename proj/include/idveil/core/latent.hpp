#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "idveil/core/errors.hpp"

namespace idveil {

struct LatentShape {
  int layers = 0;
  int channels = 0;

  bool operator==(const LatentShape&) const = default;
  std::size_t size() const { return static_cast<std::size_t>(layers) * channels; }
  std::string str() const {
    return std::to_string(layers) + "x" + std::to_string(channels);
  }
};

// A latent code is a real matrix with one row per generator layer. Rows are
// stored contiguously (row-major).
class LatentCode {
 public:
  LatentCode() = default;
  LatentCode(int layers, int channels)
      : layers_(layers), channels_(channels) {
    if (layers <= 0 || channels <= 0) {
      throw std::invalid_argument("LatentCode: shape must be positive, got " +
                                  LatentShape{layers, channels}.str());
    }
    v_.assign(shape().size(), 0.0);
  }

  // Validating constructor for values that cross an interface boundary.
  static LatentCode from_values(int layers, int channels, std::vector<double> v) {
    LatentCode code(layers, channels);
    if (v.size() != code.shape().size()) {
      throw std::invalid_argument("LatentCode: value count " + std::to_string(v.size()) +
                                  " does not match shape " + code.shape().str());
    }
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw std::invalid_argument("LatentCode: non-finite entry");
      }
    }
    code.v_ = std::move(v);
    return code;
  }

  int layers() const { return layers_; }
  int channels() const { return channels_; }
  LatentShape shape() const { return {layers_, channels_}; }
  bool same_shape(const LatentCode& o) const { return shape() == o.shape(); }

  double at(int layer, int channel) const { return v_[index(layer, channel)]; }
  double& at(int layer, int channel) { return v_[index(layer, channel)]; }

  const double* row(int layer) const { return v_.data() + static_cast<std::size_t>(layer) * channels_; }
  double* row(int layer) { return v_.data() + static_cast<std::size_t>(layer) * channels_; }

  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  bool operator==(const LatentCode&) const = default;

 private:
  std::size_t index(int layer, int channel) const {
    return static_cast<std::size_t>(layer) * channels_ + channel;
  }

  int layers_ = 0;
  int channels_ = 0;
  std::vector<double> v_;
};

// Ordered set of distinct layer indices.
class LayerSet {
 public:
  LayerSet() = default;
  LayerSet(std::initializer_list<int> layers) : LayerSet(std::vector<int>(layers)) {}
  explicit LayerSet(const std::vector<int>& layers) {
    std::set<int> uniq;
    for (int l : layers) {
      if (l < 0) throw std::invalid_argument("LayerSet: negative layer index " + std::to_string(l));
      uniq.insert(l);
    }
    indices_.assign(uniq.begin(), uniq.end());
  }

  // Layers first, first+1, ..., first+count-1.
  static LayerSet consecutive(int first, int count) {
    if (count < 0) throw std::invalid_argument("LayerSet: negative count");
    std::vector<int> v(count);
    for (int i = 0; i < count; ++i) v[i] = first + i;
    return LayerSet(v);
  }

  const std::vector<int>& indices() const { return indices_; }
  bool contains(int layer) const {
    return std::binary_search(indices_.begin(), indices_.end(), layer);
  }
  bool empty() const { return indices_.empty(); }
  std::size_t size() const { return indices_.size(); }

  std::string str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < indices_.size(); ++i) os << (i ? "," : "") << indices_[i];
    return os.str();
  }

  bool operator==(const LayerSet&) const = default;

 private:
  std::vector<int> indices_;
};

// Contiguous run of channels within one layer.
struct ChannelBlock {
  int layer = 0;
  int start = 0;
  int length = 0;

  bool operator==(const ChannelBlock&) const = default;
  std::string str() const {
    return std::to_string(layer) + ":" + std::to_string(start) + "+" + std::to_string(length);
  }
};

// Set of channel blocks. Blocks may overlap; the selected coordinates are the
// union, each counted once.
class ChannelBlockSet {
 public:
  ChannelBlockSet() = default;
  ChannelBlockSet(std::initializer_list<ChannelBlock> blocks) : blocks_(blocks) { validate(); }
  explicit ChannelBlockSet(std::vector<ChannelBlock> blocks) : blocks_(std::move(blocks)) { validate(); }

  void add(const ChannelBlock& b) {
    blocks_.push_back(b);
    validate_one(b);
  }

  const std::vector<ChannelBlock>& blocks() const { return blocks_; }
  bool empty() const { return blocks_.empty(); }

  // Number of distinct selected coordinates under the given shape.
  std::size_t selected_count(const LatentShape& shape) const {
    std::size_t n = 0;
    for (bool sel : selection_grid(shape)) n += sel ? 1 : 0;
    return n;
  }

  // Dense selection grid, true where a coordinate is covered by some block.
  std::vector<bool> selection_grid(const LatentShape& shape) const {
    std::vector<bool> grid(shape.size(), false);
    for (const auto& b : blocks_) {
      if (b.layer >= shape.layers || b.start + b.length > shape.channels) {
        throw std::invalid_argument("ChannelBlockSet: block " + b.str() +
                                    " out of range for shape " + shape.str());
      }
      const std::size_t base = static_cast<std::size_t>(b.layer) * shape.channels;
      for (int c = b.start; c < b.start + b.length; ++c) grid[base + c] = true;
    }
    return grid;
  }

 private:
  void validate() const {
    for (const auto& b : blocks_) validate_one(b);
  }
  static void validate_one(const ChannelBlock& b) {
    if (b.layer < 0 || b.start < 0 || b.length < 1) {
      throw std::invalid_argument("ChannelBlockSet: invalid block " + b.str());
    }
  }

  std::vector<ChannelBlock> blocks_;
};

// Per-coordinate blend weights in [0, 1]. A value of 1 keeps the source
// coordinate, 0 takes the other code's coordinate. Entries are validated on
// construction, so a held mask is always usable.
class LatentMask {
 public:
  LatentMask() = default;

  static LatentMask ones(const LatentShape& shape) {
    LatentMask m;
    m.layers_ = shape.layers;
    m.channels_ = shape.channels;
    m.v_.assign(shape.size(), 1.0);
    return m;
  }

  static LatentMask from_values(const LatentShape& shape, std::vector<double> v) {
    if (v.size() != shape.size()) {
      throw std::invalid_argument("LatentMask: value count does not match shape " + shape.str());
    }
    for (double x : v) {
      if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument("LatentMask: entry outside [0, 1]");
      }
    }
    LatentMask m;
    m.layers_ = shape.layers;
    m.channels_ = shape.channels;
    m.v_ = std::move(v);
    return m;
  }

  int layers() const { return layers_; }
  int channels() const { return channels_; }
  LatentShape shape() const { return {layers_, channels_}; }

  double at(int layer, int channel) const {
    return v_[static_cast<std::size_t>(layer) * channels_ + channel];
  }
  const std::vector<double>& values() const { return v_; }

  bool operator==(const LatentMask&) const = default;

 private:
  int layers_ = 0;
  int channels_ = 0;
  std::vector<double> v_;
};

namespace detail {

inline void require_same_shape(const LatentCode& a, const LatentCode& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch, " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

}  // namespace detail

// Copies the given rows of `target` over the corresponding rows of `source`.
// All other coordinates are left bit-identical to `source`.
inline LatentCode swap_layers(const LatentCode& source, const LatentCode& target,
                              const LayerSet& layers) {
  detail::require_same_shape(source, target, "swap_layers");
  LatentCode out = source;
  for (int l : layers.indices()) {
    if (l >= source.layers()) {
      throw std::invalid_argument("swap_layers: layer " + std::to_string(l) +
                                  " out of range for shape " + source.shape().str());
    }
    std::copy(target.row(l), target.row(l) + source.channels(), out.row(l));
  }
  return out;
}

// Copies the selected channel blocks of `target` over `source`. Overlapping
// blocks select the union of their coordinates.
inline LatentCode swap_channels(const LatentCode& source, const LatentCode& target,
                                const ChannelBlockSet& blocks) {
  detail::require_same_shape(source, target, "swap_channels");
  LatentCode out = source;
  const auto grid = blocks.selection_grid(source.shape());
  const auto& tv = target.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i]) ov[i] = tv[i];
  }
  return out;
}

// Elementwise result = mask * source + (1 - mask) * other.
inline LatentCode blend(const LatentCode& source, const LatentCode& other,
                        const LatentMask& mask) {
  detail::require_same_shape(source, other, "blend");
  if (mask.shape() != source.shape()) {
    throw std::invalid_argument("blend: mask shape " + mask.shape().str() +
                                " does not match code shape " + source.shape().str());
  }
  LatentCode out(source.layers(), source.channels());
  const auto& sv = source.values();
  const auto& ov = other.values();
  const auto& mv = mask.values();
  auto& rv = out.values();
  for (std::size_t i = 0; i < rv.size(); ++i) {
    rv[i] = mv[i] * sv[i] + (1.0 - mv[i]) * ov[i];
  }
  return out;
}

// Binary mask that is 0 on the selected layers and 1 elsewhere, so that
// blend(source, target, mask) performs the same replacement as swap_layers.
inline LatentMask mask_from_selection(const LatentShape& shape, const LayerSet& layers) {
  std::vector<double> v(shape.size(), 1.0);
  for (int l : layers.indices()) {
    if (l >= shape.layers) {
      throw std::invalid_argument("mask_from_selection: layer " + std::to_string(l) +
                                  " out of range for shape " + shape.str());
    }
    std::fill_n(v.begin() + static_cast<std::size_t>(l) * shape.channels, shape.channels, 0.0);
  }
  return LatentMask::from_values(shape, std::move(v));
}

// Block overload; 0 on the union of the selected blocks.
inline LatentMask mask_from_selection(const LatentShape& shape, const ChannelBlockSet& blocks) {
  std::vector<double> v(shape.size(), 1.0);
  const auto grid = blocks.selection_grid(shape);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i]) v[i] = 0.0;
  }
  return LatentMask::from_values(shape, std::move(v));
}

}  // namespace idveil
