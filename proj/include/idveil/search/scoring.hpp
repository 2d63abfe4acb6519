#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "idveil/backend/backend.hpp"
#include "idveil/metrics/disent.hpp"
#include "idveil/util/parallel.hpp"

namespace idveil {

// Knobs shared by the search operations.
struct SearchOptions {
  MetricConfig metric;
  // Evaluate candidates in both swap directions and average.
  bool symmetric = true;
  // 0 selects the hardware thread count.
  int workers = 1;
};

namespace detail {

// Runs fn(backend_ref, i) for i in [0, n). Backends are single-consumer, so
// each worker thread gets its own clone; the caller's instance is only used
// when the loop runs serially.
template <typename Fn>
void for_each_with_backend(const Backend& backend, std::size_t n, int workers, Fn&& fn) {
  workers = resolve_workers(workers);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(backend, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&](const Backend* own) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(*own, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const int count = static_cast<int>(std::min(static_cast<std::size_t>(workers), n));
  std::vector<std::unique_ptr<Backend>> clones;
  clones.reserve(count);
  for (int t = 0; t < count; ++t) clones.push_back(backend.clone());
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker, clones[t].get());
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// One ordered swap direction of an evaluation pair, with the reference
// measurements of its source reconstruction cached.
struct PairDirection {
  const LatentCode* from = nullptr;  // receives the swap
  const LatentCode* into = nullptr;  // provides the swapped coordinates
  IdentityEmbedding ref_embed;
  AttributeVector ref_attrs;
};

inline std::vector<PairDirection> build_directions(const std::vector<LatentCode>& sources,
                                                   const std::vector<LatentCode>& targets,
                                                   const Backend& backend,
                                                   const SearchOptions& opt) {
  if (sources.empty() || sources.size() != targets.size()) {
    throw std::invalid_argument("search: sources and targets must be non-empty and equal-sized");
  }
  const LatentShape shape = backend.shape().latent_shape();
  for (const auto& l : sources) {
    if (l.shape() != shape) throw std::invalid_argument("search: source latent shape mismatch");
  }
  for (const auto& l : targets) {
    if (l.shape() != shape) throw std::invalid_argument("search: target latent shape mismatch");
  }
  std::vector<PairDirection> dirs;
  dirs.reserve(sources.size() * (opt.symmetric ? 2 : 1));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    dirs.push_back({&sources[i], &targets[i], {}, {}});
    if (opt.symmetric) dirs.push_back({&targets[i], &sources[i], {}, {}});
  }
  // Reference measurements, parallel over directions, reduced by index.
  for_each_with_backend(backend, dirs.size(), opt.workers, [&](const Backend& b, std::size_t i) {
    const Image ref = b.generate(*dirs[i].from);
    dirs[i].ref_embed = b.embed_identity(ref);
    dirs[i].ref_attrs = b.predict_attributes(ref);
  });
  return dirs;
}

// Raw identity and attribute distances of one candidate evaluation.
struct RawSample {
  double d_id = 0.0;
  double d_attr = 0.0;
};

// Evaluates candidate x direction over a caller-supplied swap. `apply` maps
// (direction, backend) to the swapped-and-generated output image.
template <typename Apply>
std::vector<RawSample> score_candidates(const std::vector<PairDirection>& dirs,
                                        std::size_t n_candidates, const Backend& backend,
                                        const SearchOptions& opt, Apply&& apply) {
  std::vector<RawSample> samples(n_candidates * dirs.size());
  for_each_with_backend(backend, samples.size(), opt.workers,
                        [&](const Backend& b, std::size_t task) {
                          const std::size_t cand = task / dirs.size();
                          const std::size_t dir = task % dirs.size();
                          const Image out = apply(b, cand, dirs[dir]);
                          samples[task].d_id =
                              identity_distance(b.embed_identity(out), dirs[dir].ref_embed);
                          samples[task].d_attr =
                              attribute_distance(b.predict_attributes(out), dirs[dir].ref_attrs,
                                                 opt.metric.attr_logit);
                        });
  return samples;
}

// Pools the raw distances of the whole candidate population into min-max
// stats, then averages per-sample ia scores per candidate.
struct PooledScores {
  NormalizationStats id_stats, attr_stats;
  std::vector<double> mean_ia;    // per candidate
  std::vector<double> mean_id;    // raw means, per candidate
  std::vector<double> mean_attr;
};

inline PooledScores pool_and_score(const std::vector<RawSample>& samples,
                                   std::size_t n_candidates, std::size_t n_dirs,
                                   const MetricConfig& metric, const std::string& population) {
  std::vector<double> ids, attrs;
  ids.reserve(samples.size());
  attrs.reserve(samples.size());
  for (const auto& s : samples) {
    ids.push_back(s.d_id);
    attrs.push_back(s.d_attr);
  }
  PooledScores out;
  out.id_stats = NormalizationStats::from(ids, population + " identity distances");
  out.attr_stats = NormalizationStats::from(attrs, population + " attribute distances");
  out.mean_ia.resize(n_candidates);
  out.mean_id.resize(n_candidates);
  out.mean_attr.resize(n_candidates);
  for (std::size_t c = 0; c < n_candidates; ++c) {
    double ia = 0.0, id = 0.0, attr = 0.0;
    for (std::size_t d = 0; d < n_dirs; ++d) {
      const RawSample& s = samples[c * n_dirs + d];
      ia += ia_score(s.d_id, s.d_attr, out.id_stats, out.attr_stats, metric.alpha, metric.beta).ia;
      id += s.d_id;
      attr += s.d_attr;
    }
    const double n = static_cast<double>(n_dirs);
    out.mean_ia[c] = ia / n;
    out.mean_id[c] = id / n;
    out.mean_attr[c] = attr / n;
  }
  return out;
}

}  // namespace detail

}  // namespace idveil
