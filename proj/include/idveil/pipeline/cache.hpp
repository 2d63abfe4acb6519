#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "idveil/backend/backend.hpp"
#include "idveil/core/errors.hpp"
#include "idveil/io/image_io.hpp"
#include "idveil/io/latent_cache.hpp"
#include "idveil/pipeline/manifest.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// FNV-1a over the raw file bytes. Cheap, stable across platforms, and enough
// to notice when a source image changed under a cached latent.
inline std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open for hashing");
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (n < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

inline std::filesystem::path latent_bin_path(const std::filesystem::path& cache_dir,
                                             const std::string& id) {
  return cache_dir / (id + ".latent.bin");
}

inline std::filesystem::path latent_json_path(const std::filesystem::path& cache_dir,
                                              const std::string& id) {
  return cache_dir / (id + ".latent.json");
}

struct CacheRow {
  std::string id;
  std::string status;  // encoded | cached | failed
  std::string detail;
};

struct CacheReport {
  std::vector<CacheRow> rows;  // manifest order
  int encoded = 0;
  int reused = 0;
  int failed = 0;

  bool all_ok() const { return failed == 0; }

  Csv to_csv() const {
    Csv csv({"id", "status", "detail"});
    for (const auto& r : rows) csv.add_row({r.id, r.status, r.detail});
    return csv;
  }
};

// Encodes every manifest image into the cache directory, one tensor file plus
// sidecar per image. A cache entry is current when its sidecar loads, names
// the same backend and matches the source file hash; current entries are not
// re-encoded, stale or unreadable ones are. Per-image failures are recorded
// and do not stop the run.
inline CacheReport cache_latents(const DatasetManifest& manifest, const Backend& backend,
                                 const std::filesystem::path& cache_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create cache directory " + cache_dir.string());

  CacheReport report;
  for (const auto& entry : manifest.entries) {
    CacheRow row{entry.id, "", ""};
    try {
      const std::uint64_t hash = file_hash(entry.path);
      const fs::path bin = latent_bin_path(cache_dir, entry.id);
      const fs::path sidecar = latent_json_path(cache_dir, entry.id);
      bool current = false;
      if (fs::exists(bin) && fs::exists(sidecar)) {
        try {
          const LatentCacheEntry cached = load_latent_cache(bin.string(), sidecar.string());
          current = cached.backend_id == backend.id() && cached.source_hash == hash &&
                    cached.latent.shape() == backend.shape().latent_shape();
        } catch (const std::exception&) {
          current = false;  // unreadable entries fall through to re-encode
        }
      }
      if (current) {
        row.status = "cached";
        ++report.reused;
      } else {
        LatentCacheEntry fresh;
        fresh.latent = backend.encode(read_pfm(entry.path));
        fresh.backend_id = backend.id();
        fresh.source_image_id = entry.id;
        fresh.source_hash = hash;
        save_latent_cache(bin.string(), sidecar.string(), fresh);
        row.status = "encoded";
        ++report.encoded;
      }
    } catch (const std::exception& e) {
      row.status = "failed";
      row.detail = e.what();
      ++report.failed;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// Reads one cached latent back. Callers run this after cache_latents, so a
// missing or stale entry is an error here.
inline LatentCode load_cached_latent(const std::filesystem::path& cache_dir,
                                     const std::string& id) {
  return load_latent_cache(latent_bin_path(cache_dir, id).string(),
                           latent_json_path(cache_dir, id).string())
      .latent;
}

}  // namespace idveil
