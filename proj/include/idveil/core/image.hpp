#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "idveil/core/errors.hpp"

namespace idveil {

// Raster image, row-major, channel-interleaved. Pixel values are kept in
// double precision in memory; file formats narrow to float32.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  static Image zeros(int width, int height, int channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw std::invalid_argument("Image: dimensions must be positive");
    }
    Image im;
    im.width = width;
    im.height = height;
    im.channels = channels;
    im.data.assign(static_cast<std::size_t>(width) * height * channels, 0.0);
    return im;
  }

  std::size_t size() const { return data.size(); }
  bool same_dims(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  double px(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  double& px(int x, int y, int c = 0) { return data[index(x, y, c)]; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
};

// Segmentation label taxonomy. Values double as the label image pixel codes.
enum class Region : std::uint8_t {
  background = 0,
  skin = 1,
  eyes = 2,
  nose = 3,
  mouth = 4,
  hair = 5,
  other = 6,
};

inline constexpr int kRegionCount = 7;

inline const char* region_name(Region r) {
  switch (r) {
    case Region::background: return "background";
    case Region::skin: return "skin";
    case Region::eyes: return "eyes";
    case Region::nose: return "nose";
    case Region::mouth: return "mouth";
    case Region::hair: return "hair";
    case Region::other: return "other";
  }
  throw std::invalid_argument("region_name: bad label value");
}

inline Region region_from_name(const std::string& name) {
  for (int i = 0; i < kRegionCount; ++i) {
    const auto r = static_cast<Region>(i);
    if (name == region_name(r)) return r;
  }
  throw std::invalid_argument("unknown region label: " + name);
}

// Per-pixel label image.
class SegmentationMask {
 public:
  SegmentationMask() = default;
  SegmentationMask(int width, int height)
      : width_(width), height_(height),
        labels_(static_cast<std::size_t>(width) * height,
                static_cast<std::uint8_t>(Region::background)) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("SegmentationMask: dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  Region at(int x, int y) const {
    return static_cast<Region>(labels_[static_cast<std::size_t>(y) * width_ + x]);
  }
  void set(int x, int y, Region r) {
    labels_[static_cast<std::size_t>(y) * width_ + x] = static_cast<std::uint8_t>(r);
  }

  const std::vector<std::uint8_t>& labels() const { return labels_; }
  std::vector<std::uint8_t>& labels() { return labels_; }

  bool operator==(const SegmentationMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> labels_;
};

// Binary per-pixel mask: 1 keeps the source pixel, 0 takes the replacement.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> keep;

  static PixelMask ones(int width, int height) {
    PixelMask m;
    m.width = width;
    m.height = height;
    m.keep.assign(static_cast<std::size_t>(width) * height, 1);
    return m;
  }

  bool at(int x, int y) const { return keep[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool keep_source) {
    keep[static_cast<std::size_t>(y) * width + x] = keep_source ? 1 : 0;
  }

  std::size_t replaced_count() const {
    std::size_t n = 0;
    for (auto k : keep) n += k ? 0 : 1;
    return n;
  }
};

// Names accepted by the anonymization interface. `face` expands to the facial
// labels, `full` to every label including the background.
enum class SwapRegion { eyes, nose, mouth, face, hair, full };

using RegionSet = std::set<SwapRegion>;

inline const char* swap_region_name(SwapRegion r) {
  switch (r) {
    case SwapRegion::eyes: return "eyes";
    case SwapRegion::nose: return "nose";
    case SwapRegion::mouth: return "mouth";
    case SwapRegion::face: return "face";
    case SwapRegion::hair: return "hair";
    case SwapRegion::full: return "full";
  }
  throw std::invalid_argument("swap_region_name: bad value");
}

inline SwapRegion swap_region_from_name(const std::string& name) {
  for (SwapRegion r : {SwapRegion::eyes, SwapRegion::nose, SwapRegion::mouth,
                       SwapRegion::face, SwapRegion::hair, SwapRegion::full}) {
    if (name == swap_region_name(r)) return r;
  }
  throw std::invalid_argument("unknown swap region: " + name);
}

// Expands composite region names to the label set they cover.
inline std::set<Region> expand_regions(const RegionSet& regions) {
  std::set<Region> labels;
  for (SwapRegion r : regions) {
    switch (r) {
      case SwapRegion::eyes: labels.insert(Region::eyes); break;
      case SwapRegion::nose: labels.insert(Region::nose); break;
      case SwapRegion::mouth: labels.insert(Region::mouth); break;
      case SwapRegion::hair: labels.insert(Region::hair); break;
      case SwapRegion::face:
        labels.insert({Region::skin, Region::eyes, Region::nose, Region::mouth});
        break;
      case SwapRegion::full:
        for (int i = 0; i < kRegionCount; ++i) labels.insert(static_cast<Region>(i));
        break;
    }
  }
  return labels;
}

}  // namespace idveil
