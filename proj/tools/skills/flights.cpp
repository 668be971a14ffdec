// Action process of the flight booking example skill.
#include <csignal>
#include <cstdio>

#include "corvid/common/error.hpp"
#include "corvid/runtime/demo_skills.hpp"

namespace {
std::atomic<bool> g_stop{false};
}

int main() {
  std::signal(SIGTERM, [](int) { g_stop = true; });
  try {
    auto assist = corvid::sdk::Assistant::from_environment();
    corvid::demo::register_flights(assist);
    assist.run(&g_stop);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "corvid-skill-flights: %s\n", e.what());
    return 1;
  }
  return 0;
}
