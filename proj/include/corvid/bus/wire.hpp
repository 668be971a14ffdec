#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "corvid/bus/crypto.hpp"

namespace corvid::bus::wire {

// Frames: 4-byte big-endian length, then a canonical (key-sorted, UTF-8) JSON
// map. A frame whose map has no "op" key is an Envelope; control frames carry
// an "op" key.
inline constexpr std::uint32_t kMaxFrameBytes = 4 * 1024 * 1024;

nlohmann::json envelope_to_map(const Envelope& env);
Envelope envelope_from_map(const nlohmann::json& map);

std::string encode_envelope(const Envelope& env);
Envelope decode_envelope(std::string_view text);

std::string canonical(const nlohmann::json& map);

// Length prefix + body.
std::string frame(std::string_view body);

// Incremental decoder for a byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  // Returns the next complete frame body, if any. Throws Error(parse_error)
  // when the stream announces a frame larger than kMaxFrameBytes.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

}  // namespace corvid::bus::wire
