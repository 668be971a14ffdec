#include <doctest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

extern char** environ;

namespace fs = std::filesystem;

namespace {

const std::string kCli = CORVID_CLI;
const std::string kFixtures = CORVID_FIXTURES;
const std::string kTools = fs::path(CORVID_CLI).parent_path().string();

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "corvid-cli-XXXXXX").string();
    path = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string quote(const std::string& s) { return "'" + s + "'"; }

struct Result {
  int code;
  std::string out;
};

// Runs the CLI with stdout and stderr merged.
Result corvid(const std::string& args) {
  const auto cmd = quote(kCli) + " " + args + " 2>&1 < /dev/null";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) out.append(buf, n);
  const int status = ::pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// A long-running CLI process with its output in a file.
class Background {
 public:
  Background(const std::vector<std::string>& args, const fs::path& log) {
    std::vector<std::string> argv{kCli};
    argv.insert(argv.end(), args.begin(), args.end());
    std::vector<char*> raw;
    for (auto& a : argv) raw.push_back(a.data());
    raw.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    posix_spawn_file_actions_adddup2(&fa, 1, 2);
    REQUIRE(posix_spawn(&pid_, kCli.c_str(), &fa, nullptr, raw.data(), environ) == 0);
    posix_spawn_file_actions_destroy(&fa);
  }
  ~Background() { stop(); }
  int stop() {
    if (pid_ < 0) return status_;
    ::kill(pid_, SIGTERM);
    int st = 0;
    ::waitpid(pid_, &st, 0);
    pid_ = -1;
    status_ = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return status_;
  }

 private:
  pid_t pid_ = -1;
  int status_ = 0;
};

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = std::chrono::seconds(15)) {
  const auto end = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < end) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return pred();
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(corvid("").code != 0);
  CHECK(corvid("frobnicate").code != 0);
  CHECK(corvid("nlu parse").code != 0);
  CHECK(corvid("--help").code == 0);
}

TEST_CASE("skill lint") {
  const auto ok = corvid("skill lint " + quote(kFixtures + "/myskill"));
  CHECK(ok.code == 0);
  CHECK(ok.out == "OK\n");

  TempDir tmp;
  const auto bad = tmp.path / "bad";
  fs::copy(kFixtures + "/myskill", bad, fs::copy_options::recursive);
  write(bad / "dialog" / "nlu.md", "## lookup:city\ncity.txt\n\n## intent:book\n- fly to [Berlin](town.txt)\n");
  const auto r = corvid("skill lint " + quote(bad.string()));
  CHECK(r.code == 1);
  CHECK(contains(r.out, "nlu.md:5"));
  CHECK(contains(r.out, "town"));
}

TEST_CASE("install, train and query the models") {
  TempDir tmp;
  const auto dir = (tmp.path / "assistant").string();
  auto r = corvid("skill install " + quote(kFixtures + "/smartlights") + " --assistant-dir " + quote(dir));
  CHECK(r.code == 0);
  CHECK(contains(r.out, "writes_system_topic [info]"));
  CHECK(corvid("skill install " + quote(kFixtures + "/myskill") + " --assistant-dir " + quote(dir)).code == 0);

  r = corvid("train " + quote(dir));
  CHECK(r.code == 0);
  for (const auto* f : {"nlu.bin", "lm.bin", "nlu_examples.jsonl"}) CHECK(fs::exists(fs::path(dir) / "models" / f));
  CHECK(read(fs::path(dir) / "models" / "lm.bin").starts_with("CORVLM1"));
  CHECK(read(fs::path(dir) / "models" / "nlu.bin").starts_with("CORVNLU1"));

  const auto model = quote(dir + "/models/nlu.bin");
  r = corvid("nlu parse --model " + model + " 'turn on the light in the kitchen'");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "intent: smartlights-turn_on\n"));
  CHECK(contains(r.out, "entity: room role=room value=kitchen raw=\"kitchen\""));
  r = corvid("nlu parse --model " + model + " 'play some jazz'");
  CHECK(r.out == "intent: NoMatch\n");

  TempDir sets;
  write(sets.path / "test.jsonl",
        nlohmann::json{{"text", "turn off the lights in the garage"},
                       {"intent", "smartlights-turn_off"},
                       {"annotations", {{{"entity", "room"}, {"role", "room"}, {"canonical", "garage"}, {"span", {5, 6}}}}}}
                .dump() +
            "\n");
  r = corvid("nlu eval --model " + model + " --testset " + quote((sets.path / "test.jsonl").string()));
  CHECK(r.code == 0);
  CHECK(contains(r.out, "examples: 1\nintent_accuracy: 1.0000\nfull_accuracy: 1.0000\n"));
  write(sets.path / "bad.jsonl", "{\"text\": 1}\n");
  r = corvid("nlu eval --model " + model + " --testset " + quote((sets.path / "bad.jsonl").string()));
  CHECK(r.code == 1);
  CHECK(contains(r.out, "bad.jsonl:1"));

  r = corvid("skill status --assistant-dir " + quote(dir));
  CHECK(r.out == "myskill stopped\nsmartlights stopped\n");
  CHECK(corvid("skill status nope --assistant-dir " + quote(dir)).code == 1);
  CHECK(corvid("run --assistant-dir " + quote((tmp.path / "empty").string())).code == 1);
}

TEST_CASE("dialog configuration check") {
  TempDir tmp;
  write(tmp.path / "dialog.yaml", "window_ms: 250\nsatellites: [Alpha, Beta]\n");
  auto r = corvid("dialog --check --config " + quote((tmp.path / "dialog.yaml").string()));
  CHECK(r.code == 0);
  CHECK(contains(r.out, "window_ms: 250"));
  CHECK(contains(r.out, "satellites: Alpha, Beta"));
  write(tmp.path / "bad.yaml", "window_ms: soon\n");
  r = corvid("dialog --check --config " + quote((tmp.path / "bad.yaml").string()));
  CHECK(r.code == 1);
  CHECK(contains(r.out, "bad.yaml:1"));
}

TEST_CASE("store add, serve and install from the store") {
  TempDir tmp;
  const auto catalog = (tmp.path / "catalog").string();
  auto r = corvid("store add " + quote(kFixtures + "/myskill") + " --catalog " + quote(catalog));
  CHECK(r.code == 0);
  CHECK(contains(r.out, "internet_access [warning]"));

  const auto log = tmp.path / "store.log";
  Background store({"store", "serve", "--catalog", catalog, "--listen", "127.0.0.1:0"}, log);
  std::string addr;
  REQUIRE(eventually([&] {
    const auto text = read(log);
    const auto at = text.find("http://");
    if (at == std::string::npos || text.find('\n', at) == std::string::npos) return false;
    addr = text.substr(at + 7, text.find('\n', at) - at - 7);
    return true;
  }));
  const auto dir = (tmp.path / "assistant").string();
  r = corvid("skill install myskill --store " + addr + " --assistant-dir " + quote(dir));
  CHECK(r.code == 0);
  CHECK(read(fs::path(dir) / "skills" / "myskill" / "dialog" / "nlu.md") ==
        read(fs::path(kFixtures) / "myskill" / "dialog" / "nlu.md"));
  r = corvid("skill install nothing --store " + addr + " --assistant-dir " + quote(dir));
  CHECK(r.code == 1);
  CHECK(store.stop() == 0);
}

TEST_CASE("two networked satellites against a running assistant") {
  TempDir tmp;
  const auto dir = (tmp.path / "assistant").string();
  REQUIRE(corvid("skill install " + quote(kFixtures + "/smartlights") + " --assistant-dir " + quote(dir)).code == 0);
  REQUIRE(corvid("skill install " + quote(kFixtures + "/myskill") + " --assistant-dir " + quote(dir)).code == 0);
  REQUIRE(corvid("train " + quote(dir)).code == 0);

  Background run({"run", "--assistant-dir", dir, "--listen", "127.0.0.1:0", "--satellite", "Alpha", "--satellite",
                  "Beta", "--path", kTools},
                 tmp.path / "run.log");
  REQUIRE(eventually([&] {
    const auto st = read(fs::path(dir) / "run" / "status.json");
    return contains(st, "\"myskill\"") && !contains(st, "stopped") && fs::exists(fs::path(dir) / "run" / "bus.json");
  }));
  CHECK(corvid("skill status --assistant-dir " + quote(dir)).out == "myskill running\nsmartlights running\n");
  // Give the skill processes time to subscribe.
  std::this_thread::sleep_for(std::chrono::milliseconds(500));

  write(tmp.path / "a.script", "+0 computer, turn on the light in the lab\n+2500 computer book us a flight from augsburg to berlin\n");
  write(tmp.path / "b.script", "+40 computer, turn on the light in the lab\n");
  const auto sat = [&](const std::string& id, const std::string& script) {
    return "satellite --id " + id + " --assistant-dir " + quote(dir) + " --linger 1500 --script " +
           quote((tmp.path / script).string());
  };
  Result beta{};
  std::thread t([&] { beta = corvid(sat("Beta", "b.script")); });
  const auto alpha = corvid(sat("Alpha", "a.script"));
  t.join();
  CHECK(alpha.code == 0);
  CHECK(alpha.out == "Alpha> the light in the lab is on\nAlpha> ok boss\n");
  CHECK(beta.out == "(another room answered)\n");

  CHECK(contains(corvid(sat("Gamma", "b.script")).out, "no credential for satellite 'Gamma'"));

  auto r = corvid("skill stop smartlights --assistant-dir " + quote(dir));
  CHECK(r.out == "smartlights stopped\n");
  CHECK(corvid("skill status --assistant-dir " + quote(dir)).out == "myskill running\nsmartlights stopped\n");
  r = corvid("skill start smartlights --assistant-dir " + quote(dir));
  CHECK(r.out == "smartlights running\n");
  CHECK(run.stop() == 0);
  CHECK_FALSE(fs::exists(fs::path(dir) / "run" / "bus.json"));
}
