#pragma once

#include <string>
#include <vector>

#include "corvid/nlu/model.hpp"
#include "corvid/runtime/sdk.hpp"

namespace corvid::demo {

// The flight booking example: refuses trips to munich.
std::string flights_answer(const std::vector<nlu::Entity>& entities);
void register_flights(sdk::Assistant& assist);

// The smart light skill. `topic` is one of the six light intents.
std::string lights_answer(const std::string& topic, const std::vector<nlu::Entity>& entities);
void register_lights(sdk::Assistant& assist, const std::string& skill = "smartlights");

}  // namespace corvid::demo
