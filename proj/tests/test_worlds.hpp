#pragma once

// Synthetic world configurations shared by the test suites.

#include "idveil/backend/synthetic.hpp"

namespace idveil::testing {

// 6 layers x 4 channels: identity on full layers 2 and 3, two attributes on
// layers 0 and 1.
inline SyntheticWorldConfig tiny_world(std::uint64_t seed = 5) {
  SyntheticWorldConfig cfg;
  cfg.seed = seed;
  cfg.n_layers = 6;
  cfg.n_channels = 4;
  cfg.identity = LatentCoordSet::full_layers({2, 3}, 4);
  cfg.attributes = {LatentCoordSet({{0, 0, 1}}), LatentCoordSet({{1, 2, 3}})};
  return cfg;
}

// Reference-shaped world at a reduced channel width.
inline SyntheticWorldConfig std_world(std::uint64_t seed = 17, int channels = 32) {
  return SyntheticWorldConfig::defaults(18, channels, seed);
}

// Identity planted on exactly the consecutive layers 5, 6, 7.
inline SyntheticWorldConfig window_world(std::uint64_t seed, int channels = 32) {
  SyntheticWorldConfig cfg = SyntheticWorldConfig::defaults(18, channels, seed);
  cfg.identity = LatentCoordSet::full_layers({5, 6, 7}, channels);
  cfg.attributes = SyntheticWorldConfig::auto_attributes(cfg, 40, 2);
  return cfg;
}

// Identity split across three non-adjacent single layers.
inline SyntheticWorldConfig singleton_world(std::uint64_t seed, int channels = 32) {
  SyntheticWorldConfig cfg = SyntheticWorldConfig::defaults(18, channels, seed);
  cfg.identity = LatentCoordSet::full_layers({5, 7, 9}, channels);
  cfg.attributes = SyntheticWorldConfig::auto_attributes(cfg, 40, 2);
  return cfg;
}

// Identity confined to one channel block inside layer 8.
inline SyntheticWorldConfig block_world(std::uint64_t seed, int channels = 256,
                                        int first = 100, int last = 131) {
  SyntheticWorldConfig cfg = SyntheticWorldConfig::defaults(18, channels, seed);
  cfg.identity = LatentCoordSet({{8, first, last}});
  cfg.attributes = SyntheticWorldConfig::auto_attributes(cfg, 40, 4);
  return cfg;
}

}  // namespace idveil::testing
