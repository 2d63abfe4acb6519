#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "idveil/core/errors.hpp"
#include "idveil/core/latent.hpp"
#include "idveil/io/image_io.hpp"

namespace idveil {

// Cached encoding of one source image. The binary file is the bare tensor,
// layer-major little-endian float32; everything needed to interpret or
// invalidate it lives in the JSON sidecar.
struct LatentCacheEntry {
  LatentCode latent;
  std::string backend_id;
  std::string source_image_id;
  std::uint64_t source_hash = 0;
};

inline void save_latent_cache(const std::string& bin_path, const std::string& json_path,
                              const LatentCacheEntry& entry) {
  {
    std::ofstream os(bin_path, std::ios::binary);
    if (!os) throw IoError(bin_path + ": cannot open for writing");
    for (double v : entry.latent.values()) detail::write_le_f32(os, v);
    if (!os) throw IoError(bin_path + ": write failed");
  }
  nlohmann::ordered_json j;
  j["shape"] = {entry.latent.layers(), entry.latent.channels()};
  j["layout"] = "row-major";
  j["dtype"] = "float32-le";
  j["backend_id"] = entry.backend_id;
  j["source_image_id"] = entry.source_image_id;
  j["source_hash"] = entry.source_hash;
  std::ofstream js(json_path);
  if (!js) throw IoError(json_path + ": cannot open for writing");
  js << j.dump(2) << "\n";
}

inline LatentCacheEntry load_latent_cache(const std::string& bin_path,
                                          const std::string& json_path) {
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
    if (j.at("layout") != "row-major" || j.at("dtype") != "float32-le") {
      throw IoError(json_path + ": unsupported tensor layout");
    }
    const int layers = j.at("shape").at(0).get<int>();
    const int channels = j.at("shape").at(1).get<int>();
    LatentCacheEntry entry;
    entry.backend_id = j.at("backend_id").get<std::string>();
    entry.source_image_id = j.at("source_image_id").get<std::string>();
    entry.source_hash = j.at("source_hash").get<std::uint64_t>();

    std::ifstream is(bin_path, std::ios::binary);
    if (!is) throw IoError(bin_path + ": cannot open");
    const LatentShape shape{layers, channels};
    if (layers <= 0 || channels <= 0) throw IoError(json_path + ": bad shape");
    std::vector<double> values(shape.size());
    for (double& v : values) v = detail::read_le_f32(is, bin_path);
    if (is.get() != EOF) throw IoError(bin_path + ": trailing bytes beyond declared shape");
    entry.latent = LatentCode::from_values(layers, channels, std::move(values));
    return entry;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path + ": sidecar field error (" + e.what() + ")");
  }
}

}  // namespace idveil
