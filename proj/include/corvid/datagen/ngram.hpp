#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "corvid/datagen/expand.hpp"

namespace corvid::datagen {

inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr std::string_view kUnknown = "<unk>";

// Word n-gram model with interpolated absolute discounting. The lowest level
// interpolates with a uniform distribution over the vocabulary plus <unk>, so
// no token ever gets zero probability.
class NgramModel {
 public:
  static NgramModel build(const std::vector<std::vector<std::string>>& sentences, int order,
                          double discount = 0.75);

  int order() const { return order_; }
  double discount() const { return discount_; }
  // Predictable tokens: every training token plus </s>.
  const std::set<std::string>& vocabulary() const { return vocab_; }

  // P(token | history); only the last order-1 history tokens are used.
  // Tokens outside the vocabulary are scored as <unk>.
  double prob(const std::vector<std::string>& history, const std::string& token) const;

  // Natural-log probability of the sentence including </s>.
  double score_tokens(const std::vector<std::string>& tokens) const;
  double score(std::string_view sentence) const;

  std::string serialize() const;
  static NgramModel deserialize(std::string_view bytes);

  bool operator==(const NgramModel&) const = default;

 private:
  struct Successors {
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t total = 0;
    bool operator==(const Successors&) const = default;
  };

  double prob_at(const std::vector<std::string>& history, std::size_t take, const std::string& token) const;

  int order_ = 1;
  double discount_ = 0.75;
  std::set<std::string> vocab_;
  // Context (tokens joined by '\x1f', "" for unigrams) -> successor counts.
  std::map<std::string, Successors> contexts_;
};

NgramModel build_lm(const std::vector<TrainingExample>& examples, int order);

struct Candidate {
  std::string text;
  double acoustic_score = 0;  // log-probability
};

struct RankedCandidate {
  std::string text;
  double acoustic_score = 0;
  double lm_score = 0;
  double combined = 0;
};

struct RescoreWeights {
  double alpha = 1.0;  // LM weight
  double beta = 0.0;   // per-token bonus
};

// combined = acoustic + alpha * lm + beta * tokens, sorted descending, stable on ties.
std::vector<RankedCandidate> rescore_candidates(const NgramModel& model, const std::vector<Candidate>& candidates,
                                                const RescoreWeights& weights = {});

}  // namespace corvid::datagen
