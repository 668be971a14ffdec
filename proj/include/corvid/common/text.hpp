#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace corvid {

// ASCII-only case folding; bytes >= 0x80 pass through untouched.
std::string ascii_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string base64_encode(std::string_view bytes);
// Throws Error(parse_error) on malformed input.
std::string base64_decode(std::string_view text);

// Milliseconds since the Unix epoch. Components take a Clock so tests can
// drive time explicitly.
using Millis = std::int64_t;
using Clock = std::function<Millis()>;
Millis system_now_ms();

}  // namespace corvid
