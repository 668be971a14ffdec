#pragma once

#include <map>
#include <string>
#include <vector>

#include "corvid/common/text.hpp"

namespace corvid::dialog {

// What the assistant says when a session cannot be served. An empty phrase
// means "stay silent".
struct Phrases {
  std::string empty_transcription = "I did not understand";
  std::string no_match = "Sorry, I can not help with that";
  std::string no_handler = "Sorry, no skill answered";

  bool operator==(const Phrases&) const = default;
};

struct Deadlines {
  Millis transcribing = 10000;
  Millis understanding = 5000;
  Millis acting = 5000;
  Millis responding = 5000;

  Millis sum() const { return transcribing + understanding + acting + responding; }
  bool operator==(const Deadlines&) const = default;
};

struct DialogConfig {
  Millis window_ms = 300;
  Deadlines deadlines;
  std::string language = "en";
  std::map<std::string, Phrases> fallbacks{{"en", Phrases{}}};
  std::vector<std::string> satellites;

  // Phrases for `language`, the defaults when it has none.
  Phrases phrases() const;

  // YAML document, all keys optional:
  //   window_ms: 300
  //   deadlines_ms: {transcribing: 10000, understanding: 5000, acting: 5000, responding: 5000}
  //   language: en
  //   fallbacks: {en: {empty_transcription: ..., no_match: ..., no_handler: ...}}
  //   satellites: [Alpha, Beta]
  // Throws ParseError (Errc::malformed_config) with positions.
  static DialogConfig parse(const std::string& yaml, const std::string& file = "dialog.yaml");
  static DialogConfig load(const std::string& path);

  bool operator==(const DialogConfig&) const = default;
};

}  // namespace corvid::dialog
