#include "corvid/store/warnings.hpp"

#include <algorithm>

#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"

namespace corvid::store {

namespace {

bool is_system(const bus::TopicName& t) { return t.str().starts_with(kSystemPrefix); }

Severity read_severity(const bus::TopicName& t) {
  return t.str().starts_with("Jaco/Audio/") ? Severity::elevated : Severity::warning;
}

Severity write_severity(const bus::TopicName& t) {
  return t.str() == bus::topics::kSayText ? Severity::info : Severity::warning;
}

Severity severity_from_string(std::string_view s) {
  if (s == "info") return Severity::info;
  if (s == "warning") return Severity::warning;
  if (s == "elevated") return Severity::elevated;
  throw Error(Errc::parse_error, "unknown severity '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(WarningKind k) {
  switch (k) {
    case WarningKind::internet_access: return "internet_access";
    case WarningKind::extra_container_flags: return "extra_container_flags";
    case WarningKind::reads_system_topic: return "reads_system_topic";
    case WarningKind::writes_system_topic: return "writes_system_topic";
  }
  return "unknown";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::elevated: return "elevated";
  }
  return "unknown";
}

WarningKind warning_kind_from_string(std::string_view s) {
  for (auto k : {WarningKind::internet_access, WarningKind::extra_container_flags, WarningKind::reads_system_topic,
                 WarningKind::writes_system_topic}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::parse_error, "unknown warning kind '" + std::string(s) + "'");
}

std::vector<Warning> lint_warnings(const dsl::SkillManifest& m) {
  std::vector<Warning> out;
  if (m.needs_internet_access) {
    out.push_back({WarningKind::internet_access, Severity::warning, "can access the internet", ""});
  }
  if (const auto flags = trim(m.extra_container_flags); !flags.empty()) {
    out.push_back({WarningKind::extra_container_flags, Severity::warning,
                   "asks for extra container flags: " + std::string(flags), ""});
  }
  // Topic sets are ordered, so each kind comes out sorted by topic.
  for (const auto& t : m.topics_read) {
    if (!is_system(t)) continue;
    const auto sev = read_severity(t);
    out.push_back({WarningKind::reads_system_topic, sev,
                   sev == Severity::elevated ? "listens to the microphone stream " + t.str() : "reads " + t.str(),
                   t.str()});
  }
  for (const auto& t : m.topics_write) {
    if (!is_system(t)) continue;
    const auto sev = write_severity(t);
    out.push_back({WarningKind::writes_system_topic, sev,
                   sev == Severity::info ? "speaks answers through " + t.str() : "writes " + t.str(), t.str()});
  }
  return out;
}

nlohmann::json to_json(const Warning& w) {
  nlohmann::json j{{"kind", to_string(w.kind)}, {"severity", to_string(w.severity)}, {"detail", w.detail}};
  if (!w.topic.empty()) j["topic"] = w.topic;
  return j;
}

Warning warning_from_json(const nlohmann::json& j) {
  try {
    return Warning{warning_kind_from_string(j.at("kind").get<std::string>()),
                   severity_from_string(j.at("severity").get<std::string>()), j.at("detail").get<std::string>(),
                   j.value("topic", "")};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("malformed warning: ") + e.what());
  }
}

}  // namespace corvid::store
