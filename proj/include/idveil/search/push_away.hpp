#pragma once

#include <vector>

#include "idveil/search/scoring.hpp"

namespace idveil {

// Candidate-swap anonymization: blends each candidate into the source where
// the mask is 0 (the mask keeps source coordinates at 1, matching
// mask_from_selection), scores the results against the source, and keeps the
// candidate that pushes identity away the furthest while disturbing the
// attributes the least.
struct PushAwayResult {
  std::size_t chosen = 0;           // index into the candidate vector
  LatentCode latent;                // source with the winning candidate blended in
  DisentanglementScore score;       // score of the winning candidate
  std::vector<DisentanglementScore> all;  // per candidate, input order
};

inline PushAwayResult push_away(const LatentCode& source,
                                const std::vector<LatentCode>& candidates,
                                const LatentMask& selection, const Backend& backend,
                                const SearchOptions& opt = {}) {
  opt.metric.validate();
  if (candidates.empty()) throw std::invalid_argument("push away: no candidates");
  const LatentShape shape = backend.shape().latent_shape();
  if (source.shape() != shape) throw std::invalid_argument("push away: source shape mismatch");
  if (selection.shape() != shape) throw std::invalid_argument("push away: mask shape mismatch");
  for (const auto& c : candidates) {
    if (c.shape() != shape) throw std::invalid_argument("push away: candidate shape mismatch");
  }

  const Image ref_img = backend.generate(source);
  detail::PairDirection dir{&source, nullptr, backend.embed_identity(ref_img),
                            backend.predict_attributes(ref_img)};
  const std::vector<detail::PairDirection> dirs{dir};
  const auto samples = detail::score_candidates(
      dirs, candidates.size(), backend, opt,
      [&](const Backend& b, std::size_t cand, const detail::PairDirection& d) {
        return b.generate(blend(*d.from, candidates[cand], selection));
      });
  const auto pooled =
      detail::pool_and_score(samples, candidates.size(), 1, opt.metric, "push away");

  PushAwayResult result;
  result.all.reserve(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    result.all.push_back(ia_score(samples[c].d_id, samples[c].d_attr, pooled.id_stats,
                                  pooled.attr_stats, opt.metric.alpha, opt.metric.beta));
    if (result.all[c].ia > result.all[result.chosen].ia) result.chosen = c;
  }
  result.score = result.all[result.chosen];
  result.latent = blend(source, candidates[result.chosen], selection);
  return result;
}

}  // namespace idveil
