#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "corvid/dsl/ast.hpp"

namespace corvid::datagen {

struct Annotation {
  std::string entity;  // lookup name
  std::optional<std::string> role;
  std::string canonical;
  std::size_t start = 0;  // token span [start, end)
  std::size_t end = 0;

  bool operator==(const Annotation&) const = default;
};

struct TrainingExample {
  std::vector<std::string> tokens;
  std::string intent_id;
  std::vector<Annotation> annotations;

  std::string text() const;
  bool operator==(const TrainingExample&) const = default;
};

nlohmann::json to_json(const TrainingExample& e);
TrainingExample example_from_json(const nlohmann::json& j);

struct ExpandLimits {
  std::size_t max_per_sentence = 1000;
  std::uint64_t seed = 0;
};

using Lookups = std::map<std::string, dsl::LookupTable>;

// Number of concrete sentences a template expands to. Throws
// Error(invalid_argument) beyond 2^63.
std::uint64_t combination_count(const dsl::Sequence& sentence, const Lookups& lookups);

// The index-th combination in mixed-radix order (nodes left to right, the
// leftmost varying fastest; alternation branches in order, lookup variants
// in file order).
TrainingExample nth_combination(const dsl::Sequence& sentence, const Lookups& lookups,
                                const std::string& intent_id, std::uint64_t index);

// All combinations, or a uniform sample of exactly max_per_sentence distinct
// ones (in index order) when there are more.
std::vector<TrainingExample> expand_sentence(const dsl::Sequence& sentence, const Lookups& lookups,
                                             const std::string& intent_id, const ExpandLimits& limits,
                                             std::uint64_t sentence_seed);

std::vector<TrainingExample> expand(const dsl::SkillBundle& bundle, const ExpandLimits& limits = {});

// Uniform draw in [0, n) from 64-bit words; identical on every platform.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n);

}  // namespace corvid::datagen
