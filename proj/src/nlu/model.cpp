#include "corvid/nlu/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "corvid/common/binary_io.hpp"
#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"
#include "corvid/datagen/tokenize.hpp"

namespace corvid::nlu {

namespace {

constexpr std::string_view kMagic = "CORVNLU1";

bool is_placeholder(const std::string& t) { return t.size() > 2 && t.front() == '<' && t.back() == '>'; }

// "<city?start>" -> "<city>"
std::string strip_role(const std::string& t) {
  if (!is_placeholder(t)) return t;
  const auto q = t.find('?');
  return q == std::string::npos ? t : t.substr(0, q) + ">";
}

std::string lookup_of(const std::string& placeholder) {
  const auto q = placeholder.find('?');
  return placeholder.substr(1, (q == std::string::npos ? placeholder.size() - 1 : q) - 1);
}

std::optional<std::string> role_of(const std::string& placeholder) {
  const auto q = placeholder.find('?');
  if (q == std::string::npos) return std::nullopt;
  return placeholder.substr(q + 1, placeholder.size() - q - 2);
}

std::map<std::string, int> bag(const std::vector<std::string>& tokens) {
  std::map<std::string, int> out;
  for (const auto& t : tokens) ++out[strip_role(t)];
  return out;
}

std::vector<std::string> placeholder_lookups(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (is_placeholder(t)) out.push_back(lookup_of(t));
  }
  return out;
}

std::string skill_of(const std::string& intent_id) {
  const auto dash = intent_id.find('-');
  return dash == std::string::npos ? intent_id : intent_id.substr(0, dash);
}

}  // namespace

NluModel NluModel::train(const std::vector<datagen::TrainingExample>& examples,
                         const std::vector<dsl::SkillBundle>& bundles, const NluOptions& options) {
  if (examples.empty()) throw Error(Errc::precondition, "cannot train on an empty example list");
  NluModel m;
  m.threshold_ = options.threshold;

  std::map<std::string, std::string> owner;
  for (const auto& b : bundles) {
    std::set<std::string> own;
    for (const auto& intent : b.intents) {
      const auto id = intent.qualified_id();
      if (!own.insert(id).second) continue;
      auto [it, inserted] = owner.emplace(id, b.name);
      if (!inserted) throw Error(Errc::conflict, "intent '" + id + "' is defined by more than one skill");
    }
    for (const auto& [name, table] : b.lookups) {
      for (const auto& entry : table.entries) {
        for (const auto& v : entry.variants) {
          auto tokens = datagen::tokenize(v);
          if (tokens.empty()) continue;
          m.gazetteer_.push_back(GazetteerEntry{std::move(tokens), name, b.name, entry.canonical});
        }
      }
    }
  }
  std::sort(m.gazetteer_.begin(), m.gazetteer_.end());
  m.gazetteer_.erase(std::unique(m.gazetteer_.begin(), m.gazetteer_.end()), m.gazetteer_.end());

  std::map<std::string, std::set<std::vector<std::string>>> skeletons;
  for (const auto& e : examples) {
    std::vector<std::string> pattern;
    std::size_t i = 0;
    for (const auto& a : e.annotations) {
      if (a.start < i || a.end > e.tokens.size() || a.start > a.end) {
        throw Error(Errc::invalid_argument, "bad annotation span in example '" + e.text() + "'");
      }
      pattern.insert(pattern.end(), e.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                     e.tokens.begin() + static_cast<std::ptrdiff_t>(a.start));
      pattern.push_back("<" + a.entity + (a.role ? "?" + *a.role : "") + ">");
      i = a.end;
    }
    pattern.insert(pattern.end(), e.tokens.begin() + static_cast<std::ptrdiff_t>(i), e.tokens.end());
    skeletons[e.intent_id].insert(std::move(pattern));
  }
  for (auto& [id, set] : skeletons) {
    auto it = owner.find(id);
    Intent intent{it == owner.end() ? skill_of(id) : it->second, {set.begin(), set.end()}};
    m.intents_.emplace(id, std::move(intent));
  }
  m.compute_idf();
  m.build_index();
  return m;
}

void NluModel::compute_idf() {
  std::map<std::string, std::size_t> df;
  std::size_t n = 0;
  for (const auto& [id, intent] : intents_) {
    for (const auto& p : intent.patterns) {
      ++n;
      for (const auto& [tok, count] : bag(p)) ++df[tok];
    }
  }
  idf_.clear();
  for (const auto& [tok, d] : df) idf_[tok] = std::log(1.0 + static_cast<double>(n) / static_cast<double>(d));
  // An unseen word carries no evidence for any intent; it weighs like a
  // word that occurs in every pattern.
  unknown_weight_ = std::log(2.0);
}

void NluModel::build_index() {
  longest_variant_ = 0;
  variant_lookups_.clear();
  canonicals_.clear();
  for (const auto& g : gazetteer_) {
    longest_variant_ = std::max(longest_variant_, g.tokens.size());
    auto& lookups = variant_lookups_[g.tokens];
    if (std::find(lookups.begin(), lookups.end(), g.lookup) == lookups.end()) lookups.push_back(g.lookup);
    canonicals_.emplace(std::make_tuple(g.skill, g.lookup, g.tokens), g.canonical);
  }
  for (auto& [tokens, lookups] : variant_lookups_) std::sort(lookups.begin(), lookups.end());
}

double NluModel::idf(const std::string& token) const {
  auto it = idf_.find(strip_role(token));
  return it == idf_.end() ? unknown_weight_ : it->second;
}

std::vector<GazetteerMatch> NluModel::find_entities(const std::vector<std::string>& tokens) const {
  std::vector<GazetteerMatch> candidates;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t len = 1; len <= longest_variant_ && i + len <= tokens.size(); ++len) {
      const std::vector<std::string> key(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                         tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
      auto it = variant_lookups_.find(key);
      if (it == variant_lookups_.end()) continue;
      for (const auto& lookup : it->second) candidates.push_back({i, i + len, lookup});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const GazetteerMatch& a, const GazetteerMatch& b) {
    const auto la = a.end - a.start, lb = b.end - b.start;
    if (la != lb) return la > lb;
    if (a.start != b.start) return a.start < b.start;
    return a.lookup < b.lookup;
  });
  std::vector<bool> used(tokens.size(), false);
  std::vector<GazetteerMatch> out;
  for (const auto& c : candidates) {
    bool free = true;
    for (auto k = c.start; k < c.end; ++k) free = free && !used[k];
    if (!free) continue;
    for (auto k = c.start; k < c.end; ++k) used[k] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

const std::string* NluModel::canonical_for(const std::string& skill, const std::string& lookup,
                                           const std::vector<std::string>& tokens) const {
  auto it = canonicals_.find(std::make_tuple(skill, lookup, tokens));
  if (it != canonicals_.end()) return &it->second;
  for (const auto& g : gazetteer_) {
    if (g.lookup == lookup && g.tokens == tokens) return &g.canonical;
  }
  return nullptr;
}

std::optional<IntentResult> NluModel::parse(std::string_view text) const {
  const auto spans = datagen::tokenize_spans(text);
  if (spans.empty()) return std::nullopt;
  std::vector<std::string> tokens;
  for (const auto& s : spans) tokens.push_back(s.text);

  const auto matches = find_entities(tokens);
  std::vector<std::string> abstracted;
  std::vector<std::string> utter_lookups;
  std::size_t i = 0;
  for (const auto& m : matches) {
    abstracted.insert(abstracted.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i),
                      tokens.begin() + static_cast<std::ptrdiff_t>(m.start));
    abstracted.push_back("<" + m.lookup + ">");
    utter_lookups.push_back(m.lookup);
    i = m.end;
  }
  abstracted.insert(abstracted.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.end());
  const auto utter = bag(abstracted);

  const std::string* best_intent = nullptr;
  const std::vector<std::string>* best_pattern = nullptr;
  double best = -1;
  bool best_aligned = false;
  for (const auto& [id, intent] : intents_) {
    for (const auto& p : intent.patterns) {
      const auto pb = bag(p);
      double inter = 0, uni = 0;
      auto a = utter.begin();
      auto b = pb.begin();
      while (a != utter.end() || b != pb.end()) {
        if (b == pb.end() || (a != utter.end() && a->first < b->first)) {
          uni += a->second * idf(a->first);
          ++a;
        } else if (a == utter.end() || b->first < a->first) {
          uni += b->second * idf(b->first);
          ++b;
        } else {
          const double w = idf(a->first);
          inter += std::min(a->second, b->second) * w;
          uni += std::max(a->second, b->second) * w;
          ++a;
          ++b;
        }
      }
      const double score = uni > 0 ? inter / uni : 0;
      const bool aligned = placeholder_lookups(p) == utter_lookups;
      if (score > best + 1e-12 || (std::abs(score - best) <= 1e-12 && aligned && !best_aligned)) {
        best = score;
        best_intent = &id;
        best_pattern = &p;
        best_aligned = aligned;
      }
    }
  }
  if (!best_intent || best < threshold_) return std::nullopt;

  IntentResult r;
  r.intent_id = *best_intent;
  r.confidence = std::clamp(best, 0.0, 1.0);
  const auto& skill = intents_.at(*best_intent).skill;
  std::map<std::string, std::vector<std::optional<std::string>>> roles;
  for (const auto& t : *best_pattern) {
    if (is_placeholder(t)) roles[lookup_of(t)].push_back(role_of(t));
  }
  std::map<std::string, std::size_t> seen;
  for (const auto& m : matches) {
    Entity e;
    e.entity = m.lookup;
    const auto k = seen[m.lookup]++;
    const auto& rl = roles[m.lookup];
    if (k < rl.size()) e.role = rl[k];
    const std::vector<std::string> key(tokens.begin() + static_cast<std::ptrdiff_t>(m.start),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(m.end));
    const auto* canon = canonical_for(skill, m.lookup, key);
    e.value = canon ? *canon : join(key, " ");
    e.char_start = spans[m.start].begin;
    e.char_end = spans[m.end - 1].end;
    e.raw = std::string(text.substr(e.char_start, e.char_end - e.char_start));
    r.entities.push_back(std::move(e));
  }
  return r;
}

std::vector<std::string> NluModel::intents() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : intents_) out.push_back(id);
  return out;
}

std::vector<std::string> NluModel::patterns(const std::string& intent_id) const {
  std::vector<std::string> out;
  auto it = intents_.find(intent_id);
  if (it == intents_.end()) return out;
  for (const auto& p : it->second.patterns) out.push_back(join(p, " "));
  return out;
}

std::string NluModel::serialize() const {
  BinaryWriter w;
  w.magic(kMagic);
  w.f64(threshold_);
  w.f64(unknown_weight_);
  w.u32(static_cast<std::uint32_t>(intents_.size()));
  for (const auto& [id, intent] : intents_) {
    w.str(id);
    w.str(intent.skill);
    w.u32(static_cast<std::uint32_t>(intent.patterns.size()));
    for (const auto& p : intent.patterns) {
      w.u32(static_cast<std::uint32_t>(p.size()));
      for (const auto& t : p) w.str(t);
    }
  }
  w.u32(static_cast<std::uint32_t>(gazetteer_.size()));
  for (const auto& g : gazetteer_) {
    w.u32(static_cast<std::uint32_t>(g.tokens.size()));
    for (const auto& t : g.tokens) w.str(t);
    w.str(g.lookup);
    w.str(g.skill);
    w.str(g.canonical);
  }
  w.u32(static_cast<std::uint32_t>(idf_.size()));
  for (const auto& [tok, v] : idf_) {
    w.str(tok);
    w.f64(v);
  }
  return w.bytes();
}

NluModel NluModel::deserialize(std::string_view bytes) {
  BinaryReader r(bytes);
  r.expect_magic(kMagic);
  NluModel m;
  m.threshold_ = r.f64();
  m.unknown_weight_ = r.f64();
  for (auto n = r.u32(); n > 0; --n) {
    auto id = r.str();
    Intent intent;
    intent.skill = r.str();
    for (auto p = r.u32(); p > 0; --p) {
      std::vector<std::string> pattern;
      for (auto t = r.u32(); t > 0; --t) pattern.push_back(r.str());
      intent.patterns.push_back(std::move(pattern));
    }
    m.intents_.emplace(std::move(id), std::move(intent));
  }
  for (auto n = r.u32(); n > 0; --n) {
    GazetteerEntry g;
    for (auto t = r.u32(); t > 0; --t) g.tokens.push_back(r.str());
    g.lookup = r.str();
    g.skill = r.str();
    g.canonical = r.str();
    m.gazetteer_.push_back(std::move(g));
  }
  for (auto n = r.u32(); n > 0; --n) {
    auto tok = r.str();
    m.idf_[tok] = r.f64();
  }
  if (!r.at_end()) throw Error(Errc::parse_error, "nlu.bin: trailing bytes");
  if (!std::is_sorted(m.gazetteer_.begin(), m.gazetteer_.end())) {
    throw Error(Errc::parse_error, "nlu.bin: gazetteer out of order");
  }
  m.build_index();
  return m;
}

nlohmann::json to_json(const IntentResult& r) {
  auto entities = nlohmann::json::array();
  for (const auto& e : r.entities) {
    entities.push_back({{"entity", e.entity},
                        {"role", e.role ? nlohmann::json(*e.role) : nlohmann::json()},
                        {"value", e.value},
                        {"raw", e.raw},
                        {"span", {e.char_start, e.char_end}}});
  }
  return {{"intent", r.intent_id}, {"confidence", r.confidence}, {"entities", std::move(entities)}};
}

IntentResult intent_result_from_json(const nlohmann::json& j) {
  try {
    IntentResult r;
    r.intent_id = j.at("intent").get<std::string>();
    r.confidence = j.at("confidence").get<double>();
    for (const auto& e : j.at("entities")) {
      Entity x;
      x.entity = e.at("entity").get<std::string>();
      if (e.contains("role") && !e.at("role").is_null()) x.role = e.at("role").get<std::string>();
      x.value = e.at("value").get<std::string>();
      x.raw = e.value("raw", "");
      if (e.contains("span")) {
        x.char_start = e.at("span").at(0).get<std::size_t>();
        x.char_end = e.at("span").at(1).get<std::size_t>();
      }
      r.entities.push_back(std::move(x));
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::parse_error, std::string("bad intent result: ") + ex.what());
  }
}

}  // namespace corvid::nlu
