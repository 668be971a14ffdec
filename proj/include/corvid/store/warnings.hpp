#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corvid/dsl/ast.hpp"

namespace corvid::store {

// Declaration order is the order warnings are reported in.
enum class WarningKind { internet_access, extra_container_flags, reads_system_topic, writes_system_topic };
enum class Severity { info, warning, elevated };

std::string_view to_string(WarningKind k);
std::string_view to_string(Severity s);
WarningKind warning_kind_from_string(std::string_view s);

struct Warning {
  WarningKind kind;
  Severity severity;
  std::string detail;
  std::string topic;  // the system topic, for the two topic kinds

  bool operator==(const Warning&) const = default;
};

// Topics under this prefix belong to the assistant itself.
inline constexpr std::string_view kSystemPrefix = "Jaco/";

// Pure: depends on the manifest only. Sorted by kind, then topic.
std::vector<Warning> lint_warnings(const dsl::SkillManifest& manifest);

nlohmann::json to_json(const Warning& w);
Warning warning_from_json(const nlohmann::json& j);

}  // namespace corvid::store
