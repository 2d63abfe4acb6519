#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "idveil/search/scoring.hpp"
#include "idveil/util/csv.hpp"

namespace idveil {

// Pearson correlation, empty when either series is constant.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct AttributeCorrelation {
  int attribute = 0;
  std::optional<double> r;
};

struct CorrelationReport {
  std::vector<AttributeCorrelation> per_attribute;  // attribute index order
  std::size_t samples = 0;
  LayerSet layers;

  // Attribute indices by correlation magnitude, strongest first; attributes
  // without a defined correlation sort last.
  std::vector<int> ranking() const {
    std::vector<int> idx;
    for (const auto& a : per_attribute) idx.push_back(a.attribute);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      const auto& ra = per_attribute[a].r;
      const auto& rb = per_attribute[b].r;
      if (ra.has_value() != rb.has_value()) return ra.has_value();
      if (!ra) return false;
      return std::fabs(*ra) > std::fabs(*rb);
    });
    return idx;
  }

  Csv to_csv() const {
    Csv csv({"attribute", "r"});
    for (int a : ranking()) {
      const auto& r = per_attribute[a].r;
      csv.add_row({csv_num(a), r ? csv_num(*r) : std::string()});
    }
    return csv;
  }
};

// Correlates, per attribute, the change in the attribute's prediction with the
// change in identity distance when the given layers are swapped between the
// pair latents. Attributes that move in lockstep with identity are the poorly
// disentangled ones.
inline CorrelationReport attribute_identity_correlation(const std::vector<LatentCode>& sources,
                                                        const std::vector<LatentCode>& targets,
                                                        const LayerSet& layers,
                                                        const Backend& backend,
                                                        const SearchOptions& opt = {}) {
  if (layers.empty()) throw std::invalid_argument("correlation: empty layer selection");
  for (int l : layers.indices()) {
    if (l >= backend.shape().n_layers) {
      throw std::invalid_argument("correlation: layer " + std::to_string(l) + " out of range");
    }
  }
  const auto dirs = detail::build_directions(sources, targets, backend, opt);
  const int n_attrs = backend.shape().n_attributes;

  std::vector<double> id_delta(dirs.size());
  std::vector<std::vector<double>> attr_delta(n_attrs, std::vector<double>(dirs.size()));
  detail::for_each_with_backend(
      backend, dirs.size(), opt.workers, [&](const Backend& b, std::size_t i) {
        const Image out = b.generate(swap_layers(*dirs[i].from, *dirs[i].into, layers));
        id_delta[i] = identity_distance(b.embed_identity(out), dirs[i].ref_embed);
        const AttributeVector attrs = b.predict_attributes(out);
        for (int a = 0; a < n_attrs; ++a) {
          attr_delta[a][i] = std::fabs(attrs.values[a] - dirs[i].ref_attrs.values[a]);
        }
      });

  CorrelationReport report;
  report.samples = dirs.size();
  report.layers = layers;
  for (int a = 0; a < n_attrs; ++a) {
    report.per_attribute.push_back({a, pearson(attr_delta[a], id_delta)});
  }
  return report;
}

}  // namespace idveil
