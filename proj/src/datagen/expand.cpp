#include "corvid/datagen/expand.hpp"

#include <algorithm>
#include <unordered_set>

#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"
#include "corvid/datagen/tokenize.hpp"

namespace corvid::datagen {

namespace {

constexpr std::uint64_t kMaxCombinations = std::uint64_t{1} << 63;

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r) || r > kMaxCombinations) {
    throw Error(Errc::invalid_argument, "template expands to more than 2^63 sentences");
  }
  return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r) || r > kMaxCombinations) {
    throw Error(Errc::invalid_argument, "template expands to more than 2^63 sentences");
  }
  return r;
}

const dsl::LookupTable& table_for(const dsl::SlotRef& slot, const Lookups& lookups) {
  auto it = lookups.find(slot.lookup);
  if (it == lookups.end()) {
    throw Error(Errc::unresolved_reference, "no lookup named '" + slot.lookup + "'");
  }
  if (it->second.variant_count() == 0) {
    throw Error(Errc::precondition, "lookup '" + slot.lookup + "' is empty");
  }
  return it->second;
}

std::uint64_t count_node(const dsl::TemplateNode& node, const Lookups& lookups);

std::uint64_t count_seq(const dsl::Sequence& seq, const Lookups& lookups) {
  std::uint64_t n = 1;
  for (const auto& node : seq) n = checked_mul(n, count_node(node, lookups));
  return n;
}

std::uint64_t count_node(const dsl::TemplateNode& node, const Lookups& lookups) {
  if (std::holds_alternative<dsl::Literal>(node.value)) return 1;
  if (const auto* slot = std::get_if<dsl::SlotRef>(&node.value)) return table_for(*slot, lookups).variant_count();
  std::uint64_t n = 0;
  for (const auto& branch : std::get<dsl::Alternation>(node.value).branches) {
    n = checked_add(n, count_seq(branch, lookups));
  }
  return n;
}

void emit_seq(const dsl::Sequence& seq, const Lookups& lookups, std::uint64_t index, TrainingExample& out);

void emit_node(const dsl::TemplateNode& node, const Lookups& lookups, std::uint64_t index,
               TrainingExample& out) {
  if (const auto* lit = std::get_if<dsl::Literal>(&node.value)) {
    for (auto& t : tokenize(lit->text)) out.tokens.push_back(std::move(t));
    return;
  }
  if (const auto* slot = std::get_if<dsl::SlotRef>(&node.value)) {
    const auto& table = table_for(*slot, lookups);
    for (const auto& entry : table.entries) {
      if (index >= entry.variants.size()) {
        index -= entry.variants.size();
        continue;
      }
      Annotation a{slot->lookup, slot->role, entry.canonical, out.tokens.size(), 0};
      for (auto& t : tokenize(entry.variants[index])) out.tokens.push_back(std::move(t));
      a.end = out.tokens.size();
      out.annotations.push_back(std::move(a));
      return;
    }
    throw Error(Errc::invalid_argument, "combination index out of range");
  }
  for (const auto& branch : std::get<dsl::Alternation>(node.value).branches) {
    const auto n = count_seq(branch, lookups);
    if (index < n) {
      emit_seq(branch, lookups, index, out);
      return;
    }
    index -= n;
  }
  throw Error(Errc::invalid_argument, "combination index out of range");
}

void emit_seq(const dsl::Sequence& seq, const Lookups& lookups, std::uint64_t index, TrainingExample& out) {
  for (const auto& node : seq) {
    const auto n = count_node(node, lookups);
    emit_node(node, lookups, index % n, out);
    index /= n;
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string TrainingExample::text() const {
  return join(tokens, " ");
}

nlohmann::json to_json(const TrainingExample& e) {
  auto annotations = nlohmann::json::array();
  for (const auto& a : e.annotations) {
    annotations.push_back({{"entity", a.entity},
                           {"role", a.role ? nlohmann::json(*a.role) : nlohmann::json()},
                           {"canonical", a.canonical},
                           {"span", {a.start, a.end}}});
  }
  return {{"text", e.text()}, {"intent", e.intent_id}, {"annotations", std::move(annotations)}};
}

TrainingExample example_from_json(const nlohmann::json& j) {
  try {
    TrainingExample e;
    e.tokens = tokenize(j.at("text").get<std::string>());
    e.intent_id = j.at("intent").get<std::string>();
    for (const auto& a : j.at("annotations")) {
      Annotation ann;
      ann.entity = a.at("entity").get<std::string>();
      if (a.contains("role") && !a.at("role").is_null()) ann.role = a.at("role").get<std::string>();
      ann.canonical = a.at("canonical").get<std::string>();
      ann.start = a.at("span").at(0).get<std::size_t>();
      ann.end = a.at("span").at(1).get<std::size_t>();
      if (ann.start > ann.end || ann.end > e.tokens.size()) {
        throw Error(Errc::parse_error, "annotation span out of range");
      }
      e.annotations.push_back(std::move(ann));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::parse_error, std::string("bad training example: ") + ex.what());
  }
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error(Errc::invalid_argument, "bounded_draw needs n > 0");
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

std::uint64_t combination_count(const dsl::Sequence& sentence, const Lookups& lookups) {
  return count_seq(sentence, lookups);
}

TrainingExample nth_combination(const dsl::Sequence& sentence, const Lookups& lookups,
                                const std::string& intent_id, std::uint64_t index) {
  if (index >= count_seq(sentence, lookups)) throw Error(Errc::invalid_argument, "combination index out of range");
  TrainingExample e;
  e.intent_id = intent_id;
  emit_seq(sentence, lookups, index, e);
  return e;
}

std::vector<TrainingExample> expand_sentence(const dsl::Sequence& sentence, const Lookups& lookups,
                                             const std::string& intent_id, const ExpandLimits& limits,
                                             std::uint64_t sentence_seed) {
  if (limits.max_per_sentence == 0) throw Error(Errc::invalid_argument, "max_per_sentence must be at least 1");
  const auto total = count_seq(sentence, lookups);
  std::vector<std::uint64_t> indices;
  if (total <= limits.max_per_sentence) {
    indices.resize(total);
    for (std::uint64_t i = 0; i < total; ++i) indices[i] = i;
  } else {
    // Floyd's algorithm: exactly m distinct indices, each subset equally likely.
    std::mt19937_64 rng(sentence_seed);
    const std::uint64_t m = limits.max_per_sentence;
    std::unordered_set<std::uint64_t> chosen;
    for (std::uint64_t j = total - m; j < total; ++j) {
      const auto t = bounded_draw(rng, j + 1);
      chosen.insert(chosen.contains(t) ? j : t);
    }
    indices.assign(chosen.begin(), chosen.end());
    std::sort(indices.begin(), indices.end());
  }
  std::vector<TrainingExample> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    TrainingExample e;
    e.intent_id = intent_id;
    emit_seq(sentence, lookups, i, e);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<TrainingExample> expand(const dsl::SkillBundle& bundle, const ExpandLimits& limits) {
  std::vector<TrainingExample> out;
  std::uint64_t k = 0;
  for (const auto& intent : bundle.intents) {
    for (const auto& sentence : intent.sentences) {
      const auto seed = splitmix64(limits.seed ^ splitmix64(++k));
      auto part = expand_sentence(sentence, bundle.lookups, intent.qualified_id(), limits, seed);
      out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
  }
  return out;
}

}  // namespace corvid::datagen
