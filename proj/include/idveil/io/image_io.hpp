#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idveil/core/errors.hpp"
#include "idveil/core/image.hpp"

namespace idveil {

namespace detail {

inline void write_le_f32(std::ostream& os, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes, 4);
}

inline double read_le_f32(std::istream& is, const std::string& path) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) throw IoError(path + ": truncated float data");
  std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                       (static_cast<std::uint32_t>(bytes[1]) << 8) |
                       (static_cast<std::uint32_t>(bytes[2]) << 16) |
                       (static_cast<std::uint32_t>(bytes[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return static_cast<double>(f);
}

// Reads one whitespace-delimited header token, skipping # comment lines.
inline std::string next_token(std::istream& is, const std::string& path) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError(path + ": truncated header");
  return tok;
}

}  // namespace detail

// Float raster in PFM layout: "Pf" grayscale or "PF" three-channel, rows
// stored bottom to top, negative scale marking little-endian floats.
inline void write_pfm(const std::string& path, const Image& im) {
  if (im.channels != 1 && im.channels != 3) {
    throw IoError(path + ": PFM stores 1 or 3 channels, not " + std::to_string(im.channels));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path + ": cannot open for writing");
  os << (im.channels == 3 ? "PF" : "Pf") << "\n" << im.width << " " << im.height << "\n-1.0\n";
  for (int y = im.height - 1; y >= 0; --y) {
    for (int x = 0; x < im.width; ++x) {
      for (int c = 0; c < im.channels; ++c) detail::write_le_f32(os, im.px(x, y, c));
    }
  }
  if (!os) throw IoError(path + ": write failed");
}

inline Image read_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path + ": cannot open");
  const std::string magic = detail::next_token(is, path);
  int channels;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw IoError(path + ": not a PFM file (magic '" + magic + "')");
  }
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(detail::next_token(is, path));
    height = std::stoi(detail::next_token(is, path));
    scale = std::stod(detail::next_token(is, path));
  } catch (const std::exception&) {
    throw IoError(path + ": malformed PFM header");
  }
  if (width <= 0 || height <= 0) throw IoError(path + ": bad PFM dimensions");
  if (scale >= 0.0) throw IoError(path + ": big-endian PFM is not supported");
  Image im = Image::zeros(width, height, channels);
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) im.px(x, y, c) = detail::read_le_f32(is, path);
    }
  }
  return im;
}

// Segmentation persistence: the label grid goes into a binary 8-bit PGM, the
// label-value-to-region-name map into a JSON file next to it.
inline void write_segmentation(const std::string& pgm_path, const std::string& json_path,
                               const SegmentationMask& seg) {
  std::ofstream os(pgm_path, std::ios::binary);
  if (!os) throw IoError(pgm_path + ": cannot open for writing");
  os << "P5\n" << seg.width() << " " << seg.height() << "\n255\n";
  os.write(reinterpret_cast<const char*>(seg.labels().data()),
           static_cast<std::streamsize>(seg.labels().size()));
  if (!os) throw IoError(pgm_path + ": write failed");

  nlohmann::ordered_json j;
  j["format"] = "segmentation-labels";
  auto& labels = j["labels"] = nlohmann::ordered_json::object();
  for (int r = 0; r < kRegionCount; ++r) {
    labels[std::to_string(r)] = region_name(static_cast<Region>(r));
  }
  std::ofstream js(json_path);
  if (!js) throw IoError(json_path + ": cannot open for writing");
  js << j.dump(2) << "\n";
}

inline SegmentationMask read_segmentation(const std::string& pgm_path,
                                          const std::string& json_path) {
  std::ifstream is(pgm_path, std::ios::binary);
  if (!is) throw IoError(pgm_path + ": cannot open");
  if (detail::next_token(is, pgm_path) != "P5") throw IoError(pgm_path + ": not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(detail::next_token(is, pgm_path));
    height = std::stoi(detail::next_token(is, pgm_path));
    maxval = std::stoi(detail::next_token(is, pgm_path));
  } catch (const std::exception&) {
    throw IoError(pgm_path + ": malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval != 255) throw IoError(pgm_path + ": bad PGM header");

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
  if (!j.contains("labels") || !j["labels"].is_object()) {
    throw IoError(json_path + ": missing labels map");
  }
  // The map must agree with the fixed taxonomy; a foreign map means the file
  // was produced against a different label set.
  for (const auto& [key, name] : j["labels"].items()) {
    int value = 0;
    try {
      value = std::stoi(key);
    } catch (const std::exception&) {
      throw IoError(json_path + ": non-integer label key '" + key + "'");
    }
    if (value < 0 || value >= kRegionCount ||
        region_name(static_cast<Region>(value)) != name.get<std::string>()) {
      throw IoError(json_path + ": label map entry " + key + " does not match the taxonomy");
    }
  }

  SegmentationMask seg(width, height);
  if (!is.read(reinterpret_cast<char*>(seg.labels().data()),
               static_cast<std::streamsize>(seg.labels().size()))) {
    throw IoError(pgm_path + ": truncated pixel data");
  }
  for (std::uint8_t v : seg.labels()) {
    if (v >= kRegionCount) {
      throw IoError(pgm_path + ": label value " + std::to_string(v) + " outside the declared set");
    }
  }
  return seg;
}

}  // namespace idveil
