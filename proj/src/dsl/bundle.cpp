#include "corvid/dsl/bundle.hpp"

#include <filesystem>

#include "corvid/common/binary_io.hpp"
#include "corvid/dsl/parse.hpp"

namespace corvid::dsl {

namespace fs = std::filesystem;

namespace {

std::string read_required(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw ParseError(path.string(), 0, 0, "file not found", "missing-file", Errc::not_found);
  }
  return read_file(path.string());
}

template <typename Fn>
auto with_context(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw e.with_file(path.string());
  }
}

void collect_slots(const Sequence& seq, std::vector<const SlotRef*>& out) {
  for (const auto& node : seq) {
    if (const auto* slot = std::get_if<SlotRef>(&node.value)) {
      out.push_back(slot);
    } else if (const auto* alt = std::get_if<Alternation>(&node.value)) {
      for (const auto& b : alt->branches) collect_slots(b, out);
    }
  }
}

// First "](<lookup>" or "](<lookup>." reference in the source; 0:0 if the
// text does not contain one.
std::pair<int, int> locate_slot(const std::string& text, const std::string& lookup) {
  int line = 1;
  std::size_t line_start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      line_start = i + 1;
      continue;
    }
    if (text.compare(i, 2, "](") != 0 || text.compare(i + 2, lookup.size(), lookup) != 0) continue;
    const auto after = i + 2 + lookup.size();
    if (after < text.size() && (text[after] == '.' || text[after] == '?' || text[after] == ')')) {
      return {line, static_cast<int>(i + 2 - line_start) + 1};
    }
  }
  return {0, 0};
}

}  // namespace

SkillBundle load_bundle(const std::string& root_dir, const std::string& source) {
  const fs::path root = fs::path(root_dir).lexically_normal();
  SkillBundle bundle;
  bundle.root = root.string();
  bundle.name = root.filename().empty() ? root.parent_path().filename().string() : root.filename().string();
  bundle.source = source.empty() ? bundle.root : source;

  const auto config_path = root / "config.yaml";
  const auto config = read_required(config_path);
  bundle.manifest = with_context(config_path, [&] { return parse_manifest(config, config_path.string()); });

  const auto nlu_path = root / "dialog" / "nlu.md";
  const auto nlu_text = read_required(nlu_path);
  auto doc = with_context(nlu_path, [&] { return parse_nlu_md(bundle.name, nlu_text, nlu_path.string()); });
  bundle.intents = std::move(doc.intents);
  bundle.warnings = std::move(doc.warnings);

  for (const auto& ref : doc.lookups) {
    const auto path = root / "dialog" / ref.file;
    if (!fs::is_regular_file(path)) {
      throw ParseError(nlu_path.string(), ref.line, 1, "lookup file '" + ref.file + "' not found",
                       "unresolved-lookup", Errc::unresolved_reference);
    }
    const auto stem = lookup_stem(ref.file);
    const auto text = read_file(path.string());
    auto table = with_context(path, [&] { return parse_lookup(stem, text, path.string()); });
    auto [it, inserted] = bundle.lookups.emplace(stem, table);
    if (!inserted) it->second.entries.insert(it->second.entries.end(), table.entries.begin(), table.entries.end());
  }

  for (const auto& intent : bundle.intents) {
    for (const auto& sentence : intent.sentences) {
      std::vector<const SlotRef*> slots;
      collect_slots(sentence, slots);
      for (const auto* slot : slots) {
        if (!bundle.lookups.contains(slot->lookup)) {
          const auto [line, col] = locate_slot(nlu_text, slot->lookup);
          throw ParseError(nlu_path.string(), line, col,
                           "intent '" + intent.intent_name + "' references unknown lookup '" + slot->lookup + "'",
                           "unresolved-lookup", Errc::unresolved_reference);
        }
      }
    }
  }

  const auto action_path = root / "action" / "action.yaml";
  const bool has_descriptor = fs::is_regular_file(action_path);
  if (has_descriptor) {
    const auto text = read_file(action_path.string());
    bundle.action = with_context(action_path, [&] { return parse_action(text, action_path.string()); });
    if (bundle.action->entry_topics.empty()) {
      bundle.action->entry_topics.assign(bundle.manifest.topics_read.begin(), bundle.manifest.topics_read.end());
    }
    for (const auto& t : bundle.action->entry_topics) {
      if (!bundle.manifest.topics_read.contains(t)) {
        throw ParseError(action_path.string(), 0, 0, "entry topic '" + t.str() + "' is not in topics_read",
                         "undeclared-topic", Errc::malformed_config);
      }
    }
  }
  if (bundle.manifest.has_action != has_descriptor) {
    throw ParseError(config_path.string(), 0, 0,
                     bundle.manifest.has_action ? "has_action is true but action/action.yaml is missing"
                                                : "has_action is false but action/action.yaml exists",
                     "action-mismatch", Errc::malformed_config);
  }

  auto lint = lint_bundle(bundle);
  bundle.warnings.insert(bundle.warnings.end(), lint.begin(), lint.end());
  return bundle;
}

std::vector<Diagnostic> lint_bundle(const SkillBundle& bundle) {
  std::vector<Diagnostic> out;
  const auto nlu_path = (fs::path(bundle.root) / "dialog" / "nlu.md").string();
  for (const auto& intent : bundle.intents) {
    for (const auto& sentence : intent.sentences) {
      std::vector<const SlotRef*> slots;
      collect_slots(sentence, slots);
      for (const auto* slot : slots) {
        auto it = bundle.lookups.find(slot->lookup);
        if (it == bundle.lookups.end() || it->second.canonical_of(slot->display_value)) continue;
        out.push_back(Diagnostic{nlu_path, 0, 0,
                                 "'" + slot->display_value + "' is not a value of lookup '" + slot->lookup + "'",
                                 "unknown-display-value"});
      }
    }
  }
  return out;
}

}  // namespace corvid::dsl
