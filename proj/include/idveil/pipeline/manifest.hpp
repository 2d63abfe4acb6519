#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "idveil/core/errors.hpp"
#include "idveil/util/kv_config.hpp"

namespace idveil {

// One dataset image plus whatever side information the labels file provides.
// Optional fields stay empty when unlabeled.
struct ManifestEntry {
  std::string id;    // filename stem, unique within the dataset
  std::string path;  // image file
  std::string identity;
  std::vector<double> attributes;
  std::string segmentation;  // path to a label raster
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // lexicographic by id

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  const ManifestEntry* find(const std::string& id) const {
    const auto it = std::lower_bound(
        entries.begin(), entries.end(), id,
        [](const ManifestEntry& e, const std::string& key) { return e.id < key; });
    return (it != entries.end() && it->id == id) ? &*it : nullptr;
  }
};

namespace detail {

inline bool is_supported_image(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pfm";
}

// Labels live in the flat key-value format as `<id>.<field> = value` with
// fields identity, attributes (comma separated reals) and segmentation
// (path, resolved relative to the labels file).
inline void apply_labels(DatasetManifest& manifest, const std::filesystem::path& labels_path) {
  const KvConfig kv = KvConfig::parse_file(labels_path);
  const std::filesystem::path base = labels_path.parent_path();
  std::map<std::string, ManifestEntry*> index;
  for (auto& e : manifest.entries) index[e.id] = &e;

  for (const auto& [key, value] : kv.entries()) {
    const auto dot = key.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
      throw ConfigError(labels_path.string() + ": expected <image-id>.<field>, got '" + key + "'");
    }
    const std::string id = key.substr(0, dot);
    const std::string field = key.substr(dot + 1);
    const auto it = index.find(id);
    if (it == index.end()) {
      throw ConfigError(labels_path.string() + ": label for unknown image id '" + id + "'");
    }
    if (field == "identity") {
      it->second->identity = value;
    } else if (field == "attributes") {
      std::vector<double> attrs;
      std::istringstream is(value);
      std::string tok;
      while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
          std::size_t pos = 0;
          attrs.push_back(std::stod(tok, &pos));
          if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw ConfigError(labels_path.string() + ": bad attribute value '" + tok + "' for '" +
                            id + "'");
        }
      }
      it->second->attributes = std::move(attrs);
    } else if (field == "segmentation") {
      const std::filesystem::path seg = base / value;
      if (!std::filesystem::exists(seg)) {
        throw ConfigError(labels_path.string() + ": segmentation file " + seg.string() +
                          " for '" + id + "' does not exist");
      }
      it->second->segmentation = seg.string();
    } else {
      throw ConfigError(labels_path.string() + ": unknown label field '" + field + "' for '" +
                        id + "'");
    }
  }

  // Attribute vectors must agree in length across the labeled subset.
  std::size_t attr_len = 0;
  std::string attr_first;
  for (const auto& e : manifest.entries) {
    if (e.attributes.empty()) continue;
    if (attr_first.empty()) {
      attr_len = e.attributes.size();
      attr_first = e.id;
    } else if (e.attributes.size() != attr_len) {
      throw ConfigError(labels_path.string() + ": attribute count differs between '" +
                        attr_first + "' and '" + e.id + "'");
    }
  }
}

}  // namespace detail

// Scans a directory (non-recursive) for supported image files and returns one
// manifest entry per file, ordered lexicographically by stem. An empty
// directory yields an empty manifest; callers decide whether to warn.
inline DatasetManifest ingest(const std::filesystem::path& dir,
                              const std::optional<std::filesystem::path>& labels = {}) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir) || !fs::is_directory(dir)) {
    throw IoError("dataset directory " + dir.string() + " is not readable");
  }
  DatasetManifest manifest;
  std::map<std::string, std::string> seen;  // id -> filename, for collision messages
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file() || !detail::is_supported_image(de.path())) continue;
    ManifestEntry e;
    e.id = de.path().stem().string();
    e.path = de.path().string();
    const auto [it, fresh] = seen.emplace(e.id, de.path().filename().string());
    if (!fresh) {
      throw IoError("dataset: duplicate image id '" + e.id + "' (" + it->second + " vs " +
                    de.path().filename().string() + ")");
    }
    manifest.entries.push_back(std::move(e));
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  if (labels.has_value()) detail::apply_labels(manifest, *labels);
  return manifest;
}

}  // namespace idveil
