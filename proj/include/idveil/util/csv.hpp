#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "idveil/core/errors.hpp"

namespace idveil {

// Fixed float format shared by every report writer, so that a rerun of the
// same workflow reproduces its CSV output byte for byte.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_num(long long v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }
inline std::string csv_num(std::size_t v) { return std::to_string(v); }

// Minimal row-oriented CSV table. Fields are written verbatim; callers keep
// commas and newlines out of them.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) {
      throw std::invalid_argument("Csv: row width does not match header");
    }
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::string out = join(header_);
    for (const auto& r : rows_) {
      out += '\n';
      out += join(r);
    }
    out += '\n';
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << str();
    if (!os) throw IoError("short write to " + path.string());
  }

 private:
  static std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    return out;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace idveil
