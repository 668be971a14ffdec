// Action process of the smart light skill.
#include <csignal>
#include <cstdio>
#include <cstdlib>

#include "corvid/common/error.hpp"
#include "corvid/runtime/demo_skills.hpp"

namespace {
std::atomic<bool> g_stop{false};
}

int main() {
  std::signal(SIGTERM, [](int) { g_stop = true; });
  try {
    auto assist = corvid::sdk::Assistant::from_environment();
    // Intents are qualified by the installed skill's directory name.
    const char* dir = std::getenv(corvid::sdk::kEnvSkillDir);
    std::string name = dir ? std::string(dir) : "smartlights";
    name = name.substr(name.find_last_of('/') + 1);
    corvid::demo::register_lights(assist, name);
    assist.run(&g_stop);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "corvid-skill-lights: %s\n", e.what());
    return 1;
  }
  return 0;
}
