#include "corvid/runtime/skill_runtime.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "corvid/common/error.hpp"
#include "corvid/dsl/bundle.hpp"
#include "corvid/runtime/sdk.hpp"

extern char** environ;

namespace corvid::runtime {

namespace fs = std::filesystem;

namespace {

constexpr const char* kStderrLog = ".stderr.log";
constexpr const char* kStdoutLog = ".stdout.log";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool executable(const fs::path& p) {
  struct stat st {};
  return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
}

std::string first_word(const std::string& command) {
  const auto t = trim(command);
  const auto end = t.find_first_of(" \t");
  return std::string(t.substr(0, end));
}

}  // namespace

std::string_view to_string(SkillState s) {
  switch (s) {
    case SkillState::stopped: return "stopped";
    case SkillState::running: return "running";
    case SkillState::crashed: return "crashed";
  }
  return "unknown";
}

bus::Grants grants_for(const dsl::SkillManifest& m) { return bus::Grants{m.topics_read, m.topics_write, false}; }

Registrar Registrar::local(std::shared_ptr<bus::Broker> broker) {
  return Registrar{
      [broker](const std::string& id, const bus::Grants& g) { return broker->issue_credential(id, g); },
      [broker](const std::string& id) { broker->unregister_client(id); },
  };
}

SkillRuntime::SkillRuntime(Options options, Registrar registrar)
    : options_(std::move(options)), registrar_(std::move(registrar)) {
  if (options_.assistant_dir.empty()) throw Error(Errc::invalid_argument, "assistant directory must be set");
}

SkillRuntime::~SkillRuntime() { stop_all(); }

std::string SkillRuntime::skills_dir() const { return (fs::path(options_.assistant_dir) / "skills").string(); }

void SkillRuntime::load_installed() {
  const fs::path dir = skills_dir();
  if (!fs::exists(dir)) return;
  std::vector<fs::path> roots;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) roots.push_back(entry.path());
  }
  std::sort(roots.begin(), roots.end());
  for (const auto& root : roots) {
    auto bundle = dsl::load_bundle(root.string());
    const auto name = bundle.name;
    if (skills_.contains(name)) continue;
    InstalledSkill s;
    s.bundle = std::move(bundle);
    s.client_id = "skill-" + name;
    skills_.emplace(name, std::move(s));
  }
}

InstalledSkill& SkillRuntime::install(const std::string& source_dir) {
  const fs::path src = fs::path(source_dir).lexically_normal();
  auto probe = dsl::load_bundle(src.string(), source_dir);
  const auto name = probe.name;
  if (auto it = skills_.find(name); it != skills_.end() && it->second.state == SkillState::running) {
    throw Error(Errc::conflict, "skill '" + name + "' is running; stop it before reinstalling");
  }
  const fs::path dest = fs::path(skills_dir()) / name;
  std::error_code ec;
  if (fs::equivalent(src, dest, ec)) throw Error(Errc::conflict, "skill '" + name + "' is already installed there");
  fs::create_directories(skills_dir());
  fs::remove_all(dest);
  fs::copy(src, dest, fs::copy_options::recursive);

  InstalledSkill s;
  s.bundle = dsl::load_bundle(dest.string(), source_dir);
  s.client_id = "skill-" + name;
  skills_.insert_or_assign(name, std::move(s));
  return skills_.at(name);
}

InstalledSkill& SkillRuntime::get(const std::string& name) {
  auto it = skills_.find(name);
  if (it == skills_.end()) throw Error(Errc::not_found, "no installed skill named '" + name + "'");
  return it->second;
}

void SkillRuntime::start(const std::string& name) {
  auto& s = get(name);
  if (s.state == SkillState::running) return;
  if (!s.bundle.manifest.has_action || !s.bundle.action) return;

  const fs::path root = fs::absolute(s.bundle.root);
  s.stderr_text.clear();
  s.exit_code = 0;

  std::string path_var;
  for (const auto& p : options_.path_prefix) path_var += p + ":";
  if (const char* sys = std::getenv("PATH")) path_var += sys;

  // Resolve the program up front so a missing command fails here, not later.
  const auto program = first_word(s.bundle.action->command_line);
  bool found = false;
  if (program.find('/') != std::string::npos) {
    found = executable(root / program);
  } else {
    for (auto dir : split(path_var, ':')) {
      if (!dir.empty() && executable(fs::path(std::string(dir)) / program)) {
        found = true;
        break;
      }
    }
  }
  if (!found) {
    s.state = SkillState::crashed;
    s.exit_code = 127;
    s.stderr_text = "command not found: " + program;
    return;
  }

  registrar_.unregister_client(s.client_id);
  const auto token = registrar_.register_client(s.client_id, grants_for(s.bundle.manifest));

  std::vector<std::string> env;
  for (char** e = environ; *e; ++e) {
    std::string_view kv(*e);
    if (kv.starts_with("CORVID_") || kv.starts_with("PATH=")) continue;
    env.emplace_back(kv);
  }
  env.push_back("PATH=" + path_var);
  env.push_back(std::string(sdk::kEnvBusAddr) + "=" + options_.bus_address);
  env.push_back(std::string(sdk::kEnvClientId) + "=" + s.client_id);
  env.push_back(std::string(sdk::kEnvClientToken) + "=" + token);
  env.push_back(std::string(sdk::kEnvSkillDir) + "=" + root.string());
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);

  std::string shell = "/bin/sh", dash_c = "-c", cmd = "exec " + s.bundle.action->command_line;
  std::vector<char*> argv{shell.data(), dash_c.data(), cmd.data(), nullptr};

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addchdir_np(&fa, root.c_str());
  posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
  const auto out_log = (root / kStdoutLog).string();
  const auto err_log = (root / kStderrLog).string();
  posix_spawn_file_actions_addopen(&fa, 1, out_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  posix_spawn_file_actions_addopen(&fa, 2, err_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  // Own process group, so stop() can signal the whole skill.
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  pid_t pid = -1;
  const int rc = posix_spawn(&pid, shell.c_str(), &fa, &attr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&fa);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    registrar_.unregister_client(s.client_id);
    s.state = SkillState::crashed;
    s.exit_code = rc;
    s.stderr_text = std::string("spawn failed: ") + std::strerror(rc);
    return;
  }
  s.pid = pid;
  s.state = SkillState::running;
}

void SkillRuntime::read_stderr(InstalledSkill& s) {
  s.stderr_text = read_file(fs::path(s.bundle.root) / kStderrLog);
}

void SkillRuntime::reap(InstalledSkill& s, int status) {
  s.pid = -1;
  if (WIFEXITED(status)) {
    s.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    s.exit_code = 128 + WTERMSIG(status);
  }
  s.state = s.exit_code == 0 ? SkillState::stopped : SkillState::crashed;
  read_stderr(s);
  registrar_.unregister_client(s.client_id);
}

void SkillRuntime::stop(const std::string& name) {
  auto& s = get(name);
  if (s.state != SkillState::running) {
    if (s.state == SkillState::crashed) s.state = SkillState::stopped;
    return;
  }
  ::kill(-s.pid, SIGTERM);
  int status = 0;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (::waitpid(s.pid, &status, WNOHANG) == 0) {
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(-s.pid, SIGKILL);
      ::waitpid(s.pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  s.pid = -1;
  s.exit_code = 0;
  s.state = SkillState::stopped;
  read_stderr(s);
  registrar_.unregister_client(s.client_id);
}

void SkillRuntime::stop_all() {
  for (auto& [name, s] : skills_) {
    if (s.state == SkillState::running) stop(name);
  }
}

std::vector<std::string> SkillRuntime::refresh() {
  std::vector<std::string> changed;
  for (auto& [name, s] : skills_) {
    if (s.state != SkillState::running) continue;
    int status = 0;
    if (::waitpid(s.pid, &status, WNOHANG) == s.pid) {
      reap(s, status);
      changed.push_back(name);
    }
  }
  return changed;
}

const InstalledSkill& SkillRuntime::status(const std::string& name) {
  refresh();
  return get(name);
}

std::vector<dsl::SkillBundle> SkillRuntime::bundles() const {
  std::vector<dsl::SkillBundle> out;
  for (const auto& [name, s] : skills_) out.push_back(s.bundle);
  return out;
}

}  // namespace corvid::runtime
