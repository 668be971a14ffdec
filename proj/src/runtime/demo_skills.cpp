#include "corvid/runtime/demo_skills.hpp"

#include <algorithm>
#include <array>

#include "corvid/common/text.hpp"

namespace corvid::demo {

namespace {

std::string value_of(const std::vector<nlu::Entity>& entities, const std::string& role) {
  for (const auto& e : entities) {
    if (e.role == role) return e.value;
  }
  return {};
}

}  // namespace

std::string flights_answer(const std::vector<nlu::Entity>& entities) {
  const bool munich = std::any_of(entities.begin(), entities.end(),
                                  [](const nlu::Entity& e) { return iequals(e.value, "munich"); });
  return munich ? "that wouldn't be wise" : "ok boss";
}

void register_flights(sdk::Assistant& assist) {
  assist.add_topic_callback("book_flight", [&assist](const sdk::SkillMessage& msg) {
    const auto locs = assist.extract_entities(msg, "myskill-book_flight");
    assist.publish_answer(flights_answer(locs), msg["satellite"].get<std::string>());
  });
}

std::string lights_answer(const std::string& topic, const std::vector<nlu::Entity>& entities) {
  auto room = value_of(entities, "room");
  if (room.empty()) room = "house";
  if (topic == "turn_on") return "the light in the " + room + " is on";
  if (topic == "turn_off") return "the light in the " + room + " is off";
  if (topic == "set_color") {
    const auto color = value_of(entities, "color");
    return color.empty() ? "which color?" : "the " + room + " light is now " + color;
  }
  if (topic == "set_brightness") {
    const auto level = value_of(entities, "level");
    return level.empty() ? "how bright?" : "the " + room + " light is at " + level + " percent";
  }
  if (topic == "increase_brightness") return "the " + room + " light is brighter";
  if (topic == "decrease_brightness") return "the " + room + " light is dimmer";
  return "I can not do that";
}

void register_lights(sdk::Assistant& assist, const std::string& skill) {
  static constexpr std::array<const char*, 6> kTopics{"turn_on", "turn_off", "set_color", "set_brightness",
                                                      "increase_brightness", "decrease_brightness"};
  for (const char* t : kTopics) {
    const std::string topic = t;
    assist.add_topic_callback(topic, [&assist, topic, skill](const sdk::SkillMessage& msg) {
      const auto entities = assist.extract_entities(msg, skill + "-" + topic);
      assist.publish_answer(lights_answer(topic, entities), msg.satellite);
    });
  }
}

}  // namespace corvid::demo
