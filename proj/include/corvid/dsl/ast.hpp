#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "corvid/bus/topic.hpp"
#include "corvid/common/error.hpp"

namespace corvid::dsl {

struct LookupEntry {
  std::vector<std::string> variants;  // non-empty, trimmed
  std::string canonical;

  bool operator==(const LookupEntry&) const = default;
};

// Entity values for one slot type, e.g. "city". Variant matching ignores
// ASCII case; canonical values are kept verbatim.
struct LookupTable {
  std::string name;
  std::vector<LookupEntry> entries;

  std::optional<std::string> canonical_of(std::string_view variant) const;
  std::size_t variant_count() const;

  bool operator==(const LookupTable&) const = default;
};

struct SlotRef {
  std::string display_value;
  std::string lookup;  // lookup name (file stem)
  std::optional<std::string> role;

  bool operator==(const SlotRef&) const = default;
};

struct TemplateNode;
using Sequence = std::vector<TemplateNode>;

struct Literal {
  std::string text;
  bool operator==(const Literal&) const = default;
};

// Two or more branches; an empty branch makes the group optional.
struct Alternation {
  std::vector<Sequence> branches;
  bool operator==(const Alternation&) const = default;
};

struct TemplateNode {
  std::variant<Literal, Alternation, SlotRef> value;

  bool operator==(const TemplateNode&) const = default;
};

struct IntentTemplate {
  std::string intent_name;
  std::string skill_name;
  std::vector<Sequence> sentences;

  // "<skill>-<intent>", e.g. "myskill-book_flight".
  std::string qualified_id() const { return skill_name + "-" + intent_name; }

  bool operator==(const IntentTemplate&) const = default;
};

struct SkillManifest {
  bool has_action = false;
  std::string extra_container_flags;
  bool needs_internet_access = false;
  std::set<bus::TopicName> topics_read;
  std::set<bus::TopicName> topics_write;

  bool operator==(const SkillManifest&) const = default;
};

// How to launch a skill's action process.
struct ActionDescriptor {
  std::string command_line;
  // Topics the action handles; defaults to the manifest's topics_read.
  std::vector<bus::TopicName> entry_topics;

  bool operator==(const ActionDescriptor&) const = default;
};

struct SkillBundle {
  std::string name;
  SkillManifest manifest;
  std::vector<IntentTemplate> intents;
  std::map<std::string, LookupTable> lookups;
  std::optional<ActionDescriptor> action;
  std::string source;
  std::string root;  // directory the bundle was loaded from
  std::vector<Diagnostic> warnings;
};

}  // namespace corvid::dsl
