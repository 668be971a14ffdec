#include "corvid/dialog/config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "corvid/common/error.hpp"

namespace corvid::dialog {

namespace {

[[noreturn]] void fail_at(const std::string& file, const YAML::Node& node, const std::string& msg,
                          const std::string& kind) {
  const auto mark = node.Mark();
  throw ParseError(file, mark.line >= 0 ? mark.line + 1 : 1, mark.column >= 0 ? mark.column + 1 : 1, msg, kind,
                   Errc::malformed_config);
}

void check_keys(const std::string& file, const YAML::Node& map, std::initializer_list<std::string_view> allowed) {
  if (!map.IsMap()) fail_at(file, map, "expected a mapping", "wrong-type");
  for (const auto& kv : map) {
    if (!kv.first.IsScalar()) fail_at(file, kv.first, "keys must be strings", "wrong-type");
    if (std::find(allowed.begin(), allowed.end(), kv.first.Scalar()) == allowed.end()) {
      fail_at(file, kv.first, "unknown key '" + kv.first.Scalar() + "'", "unknown-key");
    }
  }
}

Millis read_ms(const std::string& file, const YAML::Node& node, const std::string& key) {
  if (node.IsScalar() && node.Tag() != "!") {
    try {
      const auto v = node.as<long long>();
      if (v > 0 && v <= 24LL * 3600 * 1000) return v;
    } catch (const YAML::Exception&) {
    }
  }
  fail_at(file, node, "'" + key + "' must be a positive number of milliseconds", "wrong-type");
}

std::string read_string(const std::string& file, const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar() || (node.Tag() != "!" && (node.Scalar() == "~" || node.Scalar() == "null"))) {
    fail_at(file, node, "'" + key + "' must be a string", "wrong-type");
  }
  return node.Scalar();
}

}  // namespace

Phrases DialogConfig::phrases() const {
  auto it = fallbacks.find(language);
  return it == fallbacks.end() ? Phrases{} : it->second;
}

DialogConfig DialogConfig::parse(const std::string& yaml, const std::string& file) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ParseError(file, e.mark.line + 1, e.mark.column + 1, e.msg, "syntax", Errc::malformed_config);
  }
  DialogConfig c;
  if (root.IsNull()) return c;
  check_keys(file, root, {"window_ms", "deadlines_ms", "language", "fallbacks", "satellites"});

  if (auto n = root["window_ms"]) c.window_ms = read_ms(file, n, "window_ms");
  if (auto d = root["deadlines_ms"]) {
    check_keys(file, d, {"transcribing", "understanding", "acting", "responding"});
    if (auto n = d["transcribing"]) c.deadlines.transcribing = read_ms(file, n, "transcribing");
    if (auto n = d["understanding"]) c.deadlines.understanding = read_ms(file, n, "understanding");
    if (auto n = d["acting"]) c.deadlines.acting = read_ms(file, n, "acting");
    if (auto n = d["responding"]) c.deadlines.responding = read_ms(file, n, "responding");
  }
  if (auto n = root["language"]) c.language = read_string(file, n, "language");
  if (auto f = root["fallbacks"]) {
    if (!f.IsMap()) fail_at(file, f, "'fallbacks' must map languages to phrases", "wrong-type");
    for (const auto& kv : f) {
      const auto lang = read_string(file, kv.first, "language");
      check_keys(file, kv.second, {"empty_transcription", "no_match", "no_handler"});
      Phrases p;
      if (auto n = kv.second["empty_transcription"]) p.empty_transcription = read_string(file, n, "empty_transcription");
      if (auto n = kv.second["no_match"]) p.no_match = read_string(file, n, "no_match");
      if (auto n = kv.second["no_handler"]) p.no_handler = read_string(file, n, "no_handler");
      c.fallbacks[lang] = p;
    }
  }
  if (auto s = root["satellites"]) {
    if (!s.IsSequence()) fail_at(file, s, "'satellites' must be a list of ids", "wrong-type");
    for (const auto& item : s) {
      auto id = read_string(file, item, "satellites");
      if (trim(id).empty() || trim(id).size() != id.size()) fail_at(file, item, "bad satellite id", "wrong-type");
      c.satellites.push_back(std::move(id));
    }
  }
  return c;
}

DialogConfig DialogConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, 0, "cannot read file", "missing-file", Errc::not_found);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

}  // namespace corvid::dialog
