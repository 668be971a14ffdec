#include <algorithm>

#include "corvid/common/error.hpp"
#include "corvid/datagen/ngram.hpp"
#include "corvid/datagen/tokenize.hpp"

namespace corvid::datagen {

std::vector<RankedCandidate> rescore_candidates(const NgramModel& model, const std::vector<Candidate>& candidates,
                                                const RescoreWeights& weights) {
  if (candidates.empty()) throw Error(Errc::invalid_argument, "no candidates to rescore");
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto tokens = tokenize(c.text);
    const double lm = model.score_tokens(tokens);
    out.push_back({c.text, c.acoustic_score, lm,
                   c.acoustic_score + weights.alpha * lm + weights.beta * static_cast<double>(tokens.size())});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.combined > b.combined; });
  return out;
}

}  // namespace corvid::datagen
