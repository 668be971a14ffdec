#pragma once

#include <string>

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Defined in smartlights.cpp.
Outcome nlu_benchmark();
Outcome lm_rescoring();

}  // namespace acceptance
