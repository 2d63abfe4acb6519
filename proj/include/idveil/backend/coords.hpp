#pragma once

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "idveil/core/latent.hpp"

namespace idveil {

// Inclusive channel range within one layer.
struct CoordRange {
  int layer = 0;
  int first = 0;
  int last = 0;

  bool operator==(const CoordRange&) const = default;
};

// A set of latent coordinates given as per-layer channel ranges. Used to
// declare planted identity and attribute carriers, and to derive block or
// mask selections from them.
class LatentCoordSet {
 public:
  LatentCoordSet() = default;
  explicit LatentCoordSet(std::vector<CoordRange> ranges) : ranges_(std::move(ranges)) {
    for (const auto& r : ranges_) {
      if (r.layer < 0 || r.first < 0 || r.last < r.first) {
        throw std::invalid_argument("LatentCoordSet: bad range");
      }
    }
  }

  // Every channel of each listed layer.
  static LatentCoordSet full_layers(const std::vector<int>& layers, int n_channels) {
    std::vector<CoordRange> rs;
    rs.reserve(layers.size());
    for (int l : layers) rs.push_back({l, 0, n_channels - 1});
    return LatentCoordSet(std::move(rs));
  }

  // Format: "layer:first-last" items separated by ';', e.g. "5:0-511;8:96-127".
  // A bare "layer:chan" selects a single channel.
  static LatentCoordSet parse(const std::string& text) {
    std::vector<CoordRange> rs;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ';')) {
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("LatentCoordSet: expected layer:first-last in '" + item + "'");
      }
      CoordRange r;
      r.layer = std::stoi(item.substr(0, colon));
      const std::string chans = item.substr(colon + 1);
      const auto dash = chans.find('-');
      if (dash == std::string::npos) {
        r.first = r.last = std::stoi(chans);
      } else {
        r.first = std::stoi(chans.substr(0, dash));
        r.last = std::stoi(chans.substr(dash + 1));
      }
      rs.push_back(r);
    }
    return LatentCoordSet(std::move(rs));
  }

  std::string str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
      if (i) os << ';';
      os << ranges_[i].layer << ':' << ranges_[i].first << '-' << ranges_[i].last;
    }
    return os.str();
  }

  const std::vector<CoordRange>& ranges() const { return ranges_; }
  bool empty() const { return ranges_.empty(); }

  bool contains(int layer, int channel) const {
    for (const auto& r : ranges_) {
      if (r.layer == layer && channel >= r.first && channel <= r.last) return true;
    }
    return false;
  }

  // Distinct coordinates in (layer, channel) order.
  std::vector<std::pair<int, int>> coords() const {
    std::set<std::pair<int, int>> out;
    for (const auto& r : ranges_) {
      for (int c = r.first; c <= r.last; ++c) out.emplace(r.layer, c);
    }
    return {out.begin(), out.end()};
  }

  LayerSet layers() const {
    std::vector<int> ls;
    for (const auto& r : ranges_) ls.push_back(r.layer);
    return LayerSet(ls);
  }

  ChannelBlockSet to_blocks() const {
    std::vector<ChannelBlock> bs;
    for (const auto& r : ranges_) bs.push_back({r.layer, r.first, r.last - r.first + 1});
    return ChannelBlockSet(std::move(bs));
  }

  void require_within(const LatentShape& shape, const std::string& what) const {
    for (const auto& r : ranges_) {
      if (r.layer >= shape.layers || r.last >= shape.channels) {
        throw std::invalid_argument(what + ": coordinate range out of shape " + shape.str());
      }
    }
  }

 private:
  std::vector<CoordRange> ranges_;
};

}  // namespace idveil
