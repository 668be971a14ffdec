#pragma once

#include <functional>
#include <map>
#include <string>
#include <sys/types.h>
#include <vector>

#include "corvid/bus/broker.hpp"
#include "corvid/dsl/ast.hpp"

namespace corvid::runtime {

enum class SkillState { stopped, running, crashed };
std::string_view to_string(SkillState s);

struct InstalledSkill {
  dsl::SkillBundle bundle;
  SkillState state = SkillState::stopped;
  int exit_code = 0;       // for crashed: exit status, or 128 + signal
  std::string client_id;   // "skill-<name>"
  std::string stderr_text; // captured output of the last run
  pid_t pid = -1;
};

// Grants a skill gets on the bus: exactly its manifest's topic lists.
bus::Grants grants_for(const dsl::SkillManifest& m);

// How skill processes get bus credentials. The in-process broker and the
// admin connection of a networked broker both fit.
struct Registrar {
  std::function<std::string(const std::string& client_id, const bus::Grants&)> register_client;
  std::function<void(const std::string& client_id)> unregister_client;

  static Registrar local(std::shared_ptr<bus::Broker> broker);
};

// Installs skill bundles under <assistant_dir>/skills/<name>/ and supervises
// their action processes. Not thread-safe.
class SkillRuntime {
 public:
  struct Options {
    std::string assistant_dir;
    std::string bus_address;
    // Searched before $PATH when resolving `run:` commands.
    std::vector<std::string> path_prefix;
  };

  SkillRuntime(Options options, Registrar registrar);
  ~SkillRuntime();
  SkillRuntime(const SkillRuntime&) = delete;
  SkillRuntime& operator=(const SkillRuntime&) = delete;

  // Loads every bundle already installed.
  void load_installed();
  // Copies a bundle directory into the skills directory (replacing an older
  // copy of a stopped skill) and loads it. Throws the dsl's ParseError.
  InstalledSkill& install(const std::string& source_dir);

  // No-op for skills without an action and for running skills. A failed
  // launch leaves the skill crashed.
  void start(const std::string& name);
  void stop(const std::string& name);
  void stop_all();
  // Reaps exited processes; returns the skills that changed state.
  std::vector<std::string> refresh();

  const InstalledSkill& status(const std::string& name);
  const std::map<std::string, InstalledSkill>& skills() const { return skills_; }
  std::vector<dsl::SkillBundle> bundles() const;
  std::string skills_dir() const;

 private:
  InstalledSkill& get(const std::string& name);
  void reap(InstalledSkill& s, int status);
  void read_stderr(InstalledSkill& s);

  Options options_;
  Registrar registrar_;
  std::map<std::string, InstalledSkill> skills_;
};

}  // namespace corvid::runtime
