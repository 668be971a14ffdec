#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace corvid::bus {

inline constexpr std::size_t kMaxPayloadBytes = 1024 * 1024;

enum class PayloadKind {
  wake_detected,
  stt_activate,
  transcription,
  intent_result,
  skill_answer,
  say_text,
  audio_chunk,
  session_end,
};

std::string_view to_string(PayloadKind kind);
PayloadKind payload_kind_from_string(std::string_view text);

// The cleartext message carried inside an Envelope. `body` must be a JSON
// object; nlohmann's default object type is key-ordered, which is what makes
// serialize() canonical.
struct Payload {
  PayloadKind kind = PayloadKind::say_text;
  std::string session_id;
  std::string satellite;
  nlohmann::json body = nlohmann::json::object();

  std::string serialize() const;
  static Payload deserialize(std::string_view bytes);

  bool operator==(const Payload& other) const;
};

}  // namespace corvid::bus
