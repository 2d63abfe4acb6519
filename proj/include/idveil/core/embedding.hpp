#pragma once

#include <cmath>
#include <vector>

#include "idveil/core/errors.hpp"

namespace idveil {

// Identity embedding vector. `normalized` records whether the producing
// backend scaled it to unit Euclidean norm; distance computations refuse to
// mix the two conventions.
struct IdentityEmbedding {
  std::vector<double> values;
  bool normalized = false;

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
};

// Scales to unit norm. The zero vector is left unchanged.
inline IdentityEmbedding normalize(IdentityEmbedding e) {
  const double n = e.norm();
  if (n > 0.0) {
    for (double& v : e.values) v /= n;
  }
  e.normalized = true;
  return e;
}

// Soft attribute scores, each strictly inside (0, 1).
struct AttributeVector {
  std::vector<double> values;
};

}  // namespace idveil
