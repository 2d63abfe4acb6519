#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

namespace idveil {

// Deterministic splitmix64 stream. Distributions are sampled by hand because
// the standard library ones are implementation defined, and workflow reruns
// must reproduce their outputs byte for byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). n must be nonzero.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. Always consumes two uniforms so the
  // stream position depends only on the call count.
  double next_normal() {
    double u1 = next_double();
    const double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
  }

  std::vector<double> normal_vector(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = next_normal();
    return v;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and an index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  Rng r(base ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL));
  r.next_u64();
  return r.next_u64();
}

// FNV-1a over raw bytes. Used for cache freshness checks and for seeding
// content-dependent noise.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::vector<double>& v) {
  return v.empty() ? fnv1a(nullptr, 0) : fnv1a(v.data(), v.size() * sizeof(double));
}

}  // namespace idveil
