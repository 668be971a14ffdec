#include <yaml-cpp/yaml.h>

#include "corvid/common/text.hpp"
#include "corvid/dsl/parse.hpp"

namespace corvid::dsl {

namespace {

[[noreturn]] void fail_at(const std::string& file, const YAML::Node& node, const std::string& msg,
                          const std::string& kind, Errc code = Errc::malformed_config) {
  const auto mark = node.Mark();
  const int line = mark.line >= 0 ? mark.line + 1 : 1;
  const int col = mark.column >= 0 ? mark.column + 1 : 1;
  throw ParseError(file, line, col, msg, kind, code);
}

YAML::Node load_yaml(std::string_view source, const std::string& file) {
  try {
    return YAML::Load(std::string(source));
  } catch (const YAML::Exception& e) {
    throw ParseError(file, e.mark.line + 1, e.mark.column + 1, e.msg, "syntax", Errc::malformed_config);
  }
}

// Unquoted true/false only; the string "true" is not a boolean.
bool read_bool(const std::string& file, const YAML::Node& node, const std::string& key) {
  if (node.IsScalar() && node.Tag() != "!") {
    const auto& s = node.Scalar();
    if (s == "true") return true;
    if (s == "false") return false;
  }
  fail_at(file, node, "'" + key + "' must be true or false", "wrong-type");
}

std::string read_string(const std::string& file, const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail_at(file, node, "'" + key + "' must be a string", "wrong-type");
  if (node.Tag() != "!" && (node.Scalar() == "~" || node.Scalar() == "null")) {
    fail_at(file, node, "'" + key + "' must be a string", "wrong-type");
  }
  return node.Scalar();
}

std::set<bus::TopicName> read_topics(const std::string& file, const YAML::Node& node,
                                     const std::string& key) {
  if (!node.IsSequence()) fail_at(file, node, "'" + key + "' must be a list of topics", "wrong-type");
  std::set<bus::TopicName> out;
  for (const auto& item : node) {
    if (!item.IsScalar()) fail_at(file, item, "topics must be strings", "wrong-type");
    auto topic = bus::TopicName::try_parse(item.Scalar());
    if (!topic) fail_at(file, item, "invalid topic '" + item.Scalar() + "'", "invalid-topic");
    out.insert(*topic);
  }
  return out;
}

}  // namespace

SkillManifest parse_manifest(std::string_view source, const std::string& file) {
  const auto root = load_yaml(source, file);
  if (!root.IsMap()) fail_at(file, root, "expected a mapping with a 'system' key", "wrong-type");
  for (const auto& kv : root) {
    if (!kv.first.IsScalar()) fail_at(file, kv.first, "keys must be strings", "wrong-type");
    const auto key = kv.first.Scalar();
    if (key != "system") fail_at(file, kv.first, "unknown key '" + key + "'", "unknown-key");
  }
  const auto system = root["system"];
  if (!system) fail_at(file, root, "missing 'system'", "missing-field");
  if (!system.IsMap()) fail_at(file, system, "'system' must be a mapping", "wrong-type");

  static const char* const kFields[] = {"has_action", "extra_container_flags", "needs_internet_access",
                                        "topics_read", "topics_write"};
  for (const auto& kv : system) {
    if (!kv.first.IsScalar()) fail_at(file, kv.first, "keys must be strings", "wrong-type");
    const auto key = kv.first.Scalar();
    if (std::find(std::begin(kFields), std::end(kFields), key) == std::end(kFields)) {
      fail_at(file, kv.first, "unknown key '" + key + "'", "unknown-key");
    }
  }
  for (const char* f : kFields) {
    if (!system[f]) fail_at(file, system, std::string("missing field '") + f + "'", "missing-field");
  }

  SkillManifest m;
  m.has_action = read_bool(file, system["has_action"], "has_action");
  m.extra_container_flags = read_string(file, system["extra_container_flags"], "extra_container_flags");
  m.needs_internet_access = read_bool(file, system["needs_internet_access"], "needs_internet_access");
  m.topics_read = read_topics(file, system["topics_read"], "topics_read");
  m.topics_write = read_topics(file, system["topics_write"], "topics_write");
  return m;
}

ActionDescriptor parse_action(std::string_view source, const std::string& file) {
  const auto root = load_yaml(source, file);
  if (!root.IsMap()) fail_at(file, root, "expected a mapping with a 'run' key", "wrong-type");
  for (const auto& kv : root) {
    if (!kv.first.IsScalar()) fail_at(file, kv.first, "keys must be strings", "wrong-type");
    const auto key = kv.first.Scalar();
    if (key != "run" && key != "topics") fail_at(file, kv.first, "unknown key '" + key + "'", "unknown-key");
  }
  if (!root["run"]) fail_at(file, root, "missing field 'run'", "missing-field");
  ActionDescriptor a;
  a.command_line = std::string(trim(read_string(file, root["run"], "run")));
  if (a.command_line.empty()) fail_at(file, root["run"], "'run' must not be empty", "wrong-type");
  if (root["topics"]) {
    for (const auto& t : read_topics(file, root["topics"], "topics")) a.entry_topics.push_back(t);
  }
  return a;
}

}  // namespace corvid::dsl
