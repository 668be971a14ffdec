#include "corvid/bus/topic.hpp"

#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"

namespace corvid::bus {

std::optional<TopicName> TopicName::try_parse(std::string_view text) {
  if (text.empty() || text.size() > kMaxTopicLength) return std::nullopt;
  for (auto segment : split(text, '/')) {
    if (segment.empty()) return std::nullopt;
  }
  return TopicName(std::string(text));
}

TopicName TopicName::parse(std::string_view text) {
  auto topic = try_parse(text);
  if (!topic) {
    throw Error(Errc::invalid_argument, "invalid topic name \"" + std::string(text) + "\"");
  }
  return *topic;
}

std::vector<std::string_view> TopicName::segments() const { return split(text_, '/'); }

bool TopicName::has_prefix(std::string_view prefix) const {
  return text_.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace corvid::bus
