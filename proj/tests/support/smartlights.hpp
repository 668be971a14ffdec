#pragma once

// 5-fold harness over the smart-lights fixture skill. Each fold holds out a
// fifth of every lookup's canonical values: training sentences never contain
// them, test sentences contain only them.

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "corvid/datagen/expand.hpp"
#include "corvid/dsl/bundle.hpp"

namespace smartlights {

using corvid::datagen::TrainingExample;

inline const std::vector<std::string>& distractors() {
  static const std::vector<std::string> words = {"zebra",  "quantum", "marmalade", "velvet", "pickle",
                                                 "saturn", "walrus",  "origami",   "tundra", "kazoo",
                                                 "nectar", "gizmo",   "parsnip",   "yodel",  "fjord"};
  return words;
}

struct Fold {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> test;
};

// Test sets are sampled with at most `per_intent` examples of each intent,
// since sentences with two slots expand to far more combinations than
// sentences with one.
inline std::vector<Fold> folds(const corvid::dsl::SkillBundle& bundle, int k = 5, std::size_t per_intent = 60,
                               std::uint64_t seed = 1) {
  const auto all = corvid::datagen::expand(bundle, {1000, seed});
  std::vector<Fold> out(static_cast<std::size_t>(k));
  std::mt19937_64 rng(seed);
  for (int f = 0; f < k; ++f) {
    std::set<std::pair<std::string, std::string>> held;
    for (const auto& [name, table] : bundle.lookups) {
      for (std::size_t j = 0; j < table.entries.size(); ++j) {
        if (static_cast<int>(j % static_cast<std::size_t>(k)) == f) held.insert({name, table.entries[j].canonical});
      }
    }
    auto& fold = out[static_cast<std::size_t>(f)];
    for (const auto& e : all) {
      std::size_t n_held = 0;
      for (const auto& a : e.annotations) n_held += held.contains({a.entity, a.canonical});
      if (n_held == 0) fold.train.push_back(e);
      if (!e.annotations.empty() && n_held == e.annotations.size()) fold.test.push_back(e);
    }
    std::shuffle(fold.test.begin(), fold.test.end(), rng);
    std::map<std::string, std::size_t> taken;
    std::erase_if(fold.test, [&](const TrainingExample& e) { return ++taken[e.intent_id] > per_intent; });
  }
  return out;
}

// Replaces one random token by a word that occurs nowhere in the skill.
// Labels stay as they were.
inline TrainingExample corrupt(const TrainingExample& e, std::mt19937_64& rng) {
  auto c = e;
  if (c.tokens.empty()) return c;
  c.tokens[rng() % c.tokens.size()] = distractors()[rng() % distractors().size()];
  return c;
}

}  // namespace smartlights
