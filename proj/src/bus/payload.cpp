#include "corvid/bus/payload.hpp"

#include <array>
#include <utility>

#include "corvid/common/error.hpp"

namespace corvid::bus {

namespace {

constexpr std::array<std::pair<PayloadKind, std::string_view>, 8> kKindNames{{
    {PayloadKind::wake_detected, "wake_detected"},
    {PayloadKind::stt_activate, "stt_activate"},
    {PayloadKind::transcription, "transcription"},
    {PayloadKind::intent_result, "intent_result"},
    {PayloadKind::skill_answer, "skill_answer"},
    {PayloadKind::say_text, "say_text"},
    {PayloadKind::audio_chunk, "audio_chunk"},
    {PayloadKind::session_end, "session_end"},
}};

}  // namespace

std::string_view to_string(PayloadKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

PayloadKind payload_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw Error(Errc::parse_error, "unknown payload kind \"" + std::string(text) + "\"");
}

std::string Payload::serialize() const {
  if (!body.is_object()) throw Error(Errc::invalid_argument, "payload body must be a map");
  nlohmann::json doc = {
      {"body", body},
      {"kind", to_string(kind)},
      {"satellite", satellite},
      {"session_id", session_id},
  };
  // Invalid UTF-8 is an error rather than silently replaced.
  return doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

Payload Payload::deserialize(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("payload is not a canonical map: ") + e.what());
  }
  if (!doc.is_object() || doc.size() != 4 || !doc.contains("body") || !doc.contains("kind") ||
      !doc.contains("satellite") || !doc.contains("session_id") || !doc["body"].is_object() ||
      !doc["kind"].is_string() || !doc["satellite"].is_string() ||
      !doc["session_id"].is_string()) {
    throw Error(Errc::parse_error, "payload map has the wrong shape");
  }
  Payload p;
  p.kind = payload_kind_from_string(doc["kind"].get<std::string>());
  p.session_id = doc["session_id"].get<std::string>();
  p.satellite = doc["satellite"].get<std::string>();
  p.body = std::move(doc["body"]);
  return p;
}

bool Payload::operator==(const Payload& other) const {
  return serialize() == other.serialize();
}

}  // namespace corvid::bus
