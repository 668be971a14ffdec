#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "corvid/datagen/expand.hpp"
#include "corvid/dsl/ast.hpp"

namespace corvid::nlu {

struct Entity {
  std::string entity;  // lookup name
  std::optional<std::string> role;
  std::string value;  // canonical
  std::string raw;    // surface text as typed
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool operator==(const Entity&) const = default;
};

struct IntentResult {
  std::string intent_id;
  double confidence = 0;
  std::vector<Entity> entities;

  bool operator==(const IntentResult&) const = default;
};

nlohmann::json to_json(const IntentResult& r);
IntentResult intent_result_from_json(const nlohmann::json& j);

struct NluOptions {
  double threshold = 0.5;
};

// One gazetteer line: a surface variant (as tokens) of a lookup in a skill.
struct GazetteerEntry {
  std::vector<std::string> tokens;
  std::string lookup;
  std::string skill;
  std::string canonical;

  bool operator==(const GazetteerEntry&) const = default;
  auto operator<=>(const GazetteerEntry&) const = default;
};

// A gazetteer hit in tokenized text, [start, end) in tokens.
struct GazetteerMatch {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string lookup;

  bool operator==(const GazetteerMatch&) const = default;
};

// Pattern/gazetteer intent parser. Training examples become token skeletons
// with "<lookup?role>" placeholders; parsing abstracts the utterance the same
// way and picks the skeleton with the highest idf-weighted Jaccard overlap.
class NluModel {
 public:
  static NluModel train(const std::vector<datagen::TrainingExample>& examples,
                        const std::vector<dsl::SkillBundle>& bundles, const NluOptions& options = {});

  // nullopt means no intent reached the threshold.
  std::optional<IntentResult> parse(std::string_view text) const;

  // Non-overlapping gazetteer hits chosen by longer match, then earlier
  // start, then lookup name.
  std::vector<GazetteerMatch> find_entities(const std::vector<std::string>& tokens) const;

  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }
  std::vector<std::string> intents() const;
  // Skeletons of one intent, e.g. "book me a flight from <city?start> to <city?destination>".
  std::vector<std::string> patterns(const std::string& intent_id) const;
  double idf(const std::string& token) const;

  std::string serialize() const;
  static NluModel deserialize(std::string_view bytes);

  bool operator==(const NluModel&) const = default;

 private:
  struct Intent {
    std::string skill;
    std::vector<std::vector<std::string>> patterns;  // sorted, distinct
    bool operator==(const Intent&) const = default;
  };

  void compute_idf();
  void build_index();
  const std::string* canonical_for(const std::string& skill, const std::string& lookup,
                                   const std::vector<std::string>& tokens) const;

  double threshold_ = 0.5;
  double unknown_weight_ = 0;
  std::map<std::string, Intent> intents_;
  std::vector<GazetteerEntry> gazetteer_;  // sorted
  std::map<std::string, double> idf_;
  // Derived from gazetteer_ by build_index().
  std::size_t longest_variant_ = 0;
  std::map<std::vector<std::string>, std::vector<std::string>> variant_lookups_;
  std::map<std::tuple<std::string, std::string, std::vector<std::string>>, std::string> canonicals_;
};

struct EvalReport {
  std::size_t total = 0;
  double intent_accuracy = 0;
  double full_accuracy = 0;
  // (expected intent, predicted intent or "NoMatch") -> count
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;

  std::string format() const;
};

inline constexpr std::string_view kNoMatch = "NoMatch";

// An example counts as fully correct when the intent matches and the
// (entity, role, canonical) multiset equals the expected one.
EvalReport evaluate(const NluModel& model, const std::vector<datagen::TrainingExample>& labeled);

bool slots_match(const IntentResult& result, const datagen::TrainingExample& expected);

}  // namespace corvid::nlu
