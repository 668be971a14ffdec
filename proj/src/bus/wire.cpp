#include "corvid/bus/wire.hpp"

#include <algorithm>

#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"

namespace corvid::bus::wire {

nlohmann::json envelope_to_map(const Envelope& env) {
  return {
      {"ciphertext", base64_encode(std::string_view(
                         reinterpret_cast<const char*>(env.ciphertext.data()), env.ciphertext.size()))},
      {"key_id", env.key_id},
      {"nonce", base64_encode(std::string_view(reinterpret_cast<const char*>(env.nonce.data()),
                                               env.nonce.size()))},
      {"sender", env.sender},
      {"timestamp", env.timestamp_ms},
      {"topic", env.topic.str()},
  };
}

Envelope envelope_from_map(const nlohmann::json& map) {
  static const char* const kFields[] = {"ciphertext", "key_id", "nonce",
                                        "sender",     "timestamp", "topic"};
  if (!map.is_object() || map.size() != std::size(kFields)) {
    throw Error(Errc::parse_error, "envelope map has the wrong number of fields");
  }
  for (const char* f : kFields) {
    if (!map.contains(f)) throw Error(Errc::parse_error, std::string("envelope lacks ") + f);
  }
  if (!map["ciphertext"].is_string() || !map["nonce"].is_string() ||
      !map["sender"].is_string() || !map["topic"].is_string() ||
      !map["key_id"].is_number_unsigned() || !map["timestamp"].is_number_integer()) {
    throw Error(Errc::parse_error, "envelope field has the wrong type");
  }
  auto topic = TopicName::try_parse(map["topic"].get<std::string>());
  if (!topic) throw Error(Errc::parse_error, "envelope topic is invalid");

  Envelope env{*topic, map["key_id"].get<std::uint64_t>(), {}, {},
               map["sender"].get<std::string>(), map["timestamp"].get<std::int64_t>()};
  auto nonce = base64_decode(map["nonce"].get<std::string>());
  if (nonce.size() != kNonceSize) throw Error(Errc::parse_error, "nonce must be 12 bytes");
  std::copy(nonce.begin(), nonce.end(), env.nonce.begin());
  auto ct = base64_decode(map["ciphertext"].get<std::string>());
  env.ciphertext.assign(ct.begin(), ct.end());
  return env;
}

std::string canonical(const nlohmann::json& map) {
  return map.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string encode_envelope(const Envelope& env) { return canonical(envelope_to_map(env)); }

Envelope decode_envelope(std::string_view text) {
  nlohmann::json map;
  try {
    map = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("envelope is not a map: ") + e.what());
  }
  return envelope_from_map(map);
}

std::string frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw Error(Errc::payload_too_large, "frame too large");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(body);
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<std::uint8_t>(buffer_[i])); };
  const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (n > kMaxFrameBytes) throw Error(Errc::parse_error, "announced frame exceeds limit");
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string body = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return body;
}

}  // namespace corvid::bus::wire
