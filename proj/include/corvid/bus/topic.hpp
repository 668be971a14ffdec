#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corvid::bus {

inline constexpr std::size_t kMaxTopicLength = 256;

// A "/"-separated topic such as "Jaco/Skills/SayText". Segments are non-empty
// and comparison is exact and case-sensitive.
class TopicName {
 public:
  // Throws Error(invalid_argument) when `text` is not a valid topic.
  static TopicName parse(std::string_view text);
  static std::optional<TopicName> try_parse(std::string_view text);

  const std::string& str() const { return text_; }
  std::vector<std::string_view> segments() const;
  bool has_prefix(std::string_view prefix) const;

  auto operator<=>(const TopicName&) const = default;
  bool operator==(const TopicName&) const = default;

 private:
  explicit TopicName(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

// Topics used between the core modules.
namespace topics {
inline constexpr std::string_view kWakeDetected = "Jaco/WakeWord/Detected";
inline constexpr std::string_view kSttActivate = "Jaco/Stt/Activate";
inline constexpr std::string_view kAudioStream = "Jaco/Audio/Stream";
inline constexpr std::string_view kTranscription = "Jaco/Stt/Transcription";
inline constexpr std::string_view kNluRequest = "Jaco/Nlu/Request";
inline constexpr std::string_view kNluResult = "Jaco/Nlu/Result";
inline constexpr std::string_view kSayText = "Jaco/Skills/SayText";
inline constexpr std::string_view kTtsSay = "Jaco/Tts/Say";
inline constexpr std::string_view kTtsDone = "Jaco/Tts/Done";
inline constexpr std::string_view kSatellitePlay = "Jaco/Satellites/Play";
inline constexpr std::string_view kSessionEnd = "Jaco/Dialog/SessionEnd";
}  // namespace topics

// Prefix reserved for the assistant's own modules.
inline constexpr std::string_view kSystemTopicPrefix = "Jaco/";

}  // namespace corvid::bus
