// corvid: command line front end for the assistant, its skills and the store.
#include <sys/stat.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "corvid/bus/server.hpp"
#include "corvid/common/error.hpp"
#include "corvid/dsl/bundle.hpp"
#include "corvid/runtime/assistant_host.hpp"
#include "corvid/runtime/skill_runtime.hpp"
#include "corvid/store/server.hpp"

using namespace corvid;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void install_signal_handlers() {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
}

void sleep_ms(int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Written via rename; `secret` files are readable by the owner only.
void write_file(const fs::path& p, const std::string& text, bool secret = false) {
  fs::create_directories(p.parent_path());
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp);
    out << text;
  }
  if (secret) ::chmod(tmp.c_str(), 0600);
  fs::rename(tmp, p);
}

// <assistant-dir>/run holds what a running assistant shares with other
// invocations: bus.json (address, admin token), credentials.json
// (satellite id -> token) and status.json (skill states).
fs::path run_dir(const std::string& dir) { return fs::path(dir) / "run"; }
fs::path models_dir(const std::string& dir) { return fs::path(dir) / "models"; }
// Per-skill wish written by `skill start|stop`, applied by `run`.
fs::path desired_file(const std::string& dir, const std::string& name) {
  return fs::path(dir) / "skills" / name / ".desired";
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, p.string() + ": " + e.what());
  }
}

std::string format_result(const std::optional<nlu::IntentResult>& r) {
  if (!r) return std::string("intent: ") + std::string(nlu::kNoMatch) + "\n";
  std::string out = fmt::format("intent: {}\nconfidence: {:.3f}\n", r->intent_id, r->confidence);
  for (const auto& e : r->entities) {
    out += fmt::format("entity: {} role={} value={} raw=\"{}\" span={}-{}\n", e.entity, e.role.value_or("-"), e.value,
                       e.raw, e.char_start, e.char_end);
  }
  return out;
}

// Lines typed on stdin, read on a helper thread.
class StdinLines {
 public:
  StdinLines() {
    std::thread([this] {
      for (std::string line; std::getline(std::cin, line);) {
        std::lock_guard lock(mutex_);
        lines_.push_back(line);
      }
      eof_ = true;
    }).detach();
  }
  std::optional<std::string> next() {
    std::lock_guard lock(mutex_);
    if (lines_.empty()) return std::nullopt;
    auto l = std::move(lines_.front());
    lines_.pop_front();
    return l;
  }
  bool done() {
    std::lock_guard lock(mutex_);
    return eof_ && lines_.empty();
  }

 private:
  std::mutex mutex_;
  std::deque<std::string> lines_;
  std::atomic<bool> eof_{false};
};

// ---- bus ----------------------------------------------------------------

int cmd_bus(const std::string& listen, const std::string& token_file) {
  auto handle = bus::broker_start(bus::BrokerConfig{listen, std::nullopt, ""});
  if (!token_file.empty()) write_file(token_file, handle.broker->admin_token() + "\n", true);
  std::printf("listening on %s\n", handle.address().c_str());
  std::fflush(stdout);
  install_signal_handlers();
  while (!g_stop) sleep_ms(50);
  handle.stop();
  return 0;
}

// ---- run ----------------------------------------------------------------

struct RunOptions {
  std::string assistant_dir;
  std::string listen = "127.0.0.1:7420";
  std::string config;
  std::vector<std::string> satellites;
  std::vector<std::string> path;
  bool verbose = false;
};

void write_status(const std::string& dir, runtime::SkillRuntime& rt) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, s] : rt.skills()) {
    j[name] = {{"state", runtime::to_string(s.state)}, {"exit_code", s.exit_code}};
  }
  write_file(run_dir(dir) / "status.json", j.dump(2) + "\n");
}

std::string desired_state(const std::string& dir, const std::string& name) {
  const auto p = desired_file(dir, name);
  return fs::exists(p) ? std::string(trim(read_file(p))) : "running";
}

int cmd_run(RunOptions o) {
  auto config = o.config.empty() ? dialog::DialogConfig{} : dialog::DialogConfig::load(o.config);
  for (const auto& s : o.satellites) {
    if (std::find(config.satellites.begin(), config.satellites.end(), s) == config.satellites.end()) {
      config.satellites.push_back(s);
    }
  }
  if (!fs::exists(models_dir(o.assistant_dir) / "nlu.bin")) {
    throw Error(Errc::precondition, "no trained models in " + o.assistant_dir + "; run 'corvid train' first");
  }
  auto models = runtime::load_models(models_dir(o.assistant_dir).string());

  auto handle = bus::broker_start(bus::BrokerConfig{o.listen, std::nullopt, ""});
  runtime::SkillRuntime rt({o.assistant_dir, handle.address(), o.path}, runtime::Registrar::local(handle.broker));
  rt.load_installed();

  const bool verbose = o.verbose;
  runtime::LocalAssistant host(handle.broker, rt.bundles(), std::move(models),
                               {config, {}, [verbose](const std::string& line) {
                                  if (verbose) std::fprintf(stderr, "%s\n", line.c_str());
                                }},
                               system_now_ms);

  nlohmann::json creds = nlohmann::json::object();
  for (const auto& id : config.satellites) {
    creds[id] = handle.broker->issue_credential("satellite-" + id, satellite::satellite_grants());
  }
  write_file(run_dir(o.assistant_dir) / "credentials.json", creds.dump(2) + "\n", true);
  write_file(run_dir(o.assistant_dir) / "bus.json",
             nlohmann::json{{"address", handle.address()}, {"admin_token", handle.broker->admin_token()}}.dump(2) +
                 "\n",
             true);

  install_signal_handlers();
  std::printf("assistant running on %s with %zu skill(s)\n", handle.address().c_str(), rt.skills().size());
  std::fflush(stdout);

  auto last_check = std::chrono::steady_clock::time_point{};
  std::map<std::string, std::string> applied;
  while (!g_stop) {
    host.poll();
    if (std::chrono::steady_clock::now() - last_check > std::chrono::milliseconds(200)) {
      last_check = std::chrono::steady_clock::now();
      for (const auto& name : rt.refresh()) {
        const auto& s = rt.status(name);
        std::fprintf(stderr, "skill %s %s (exit %d)\n", name.c_str(), std::string(runtime::to_string(s.state)).c_str(),
                     s.exit_code);
      }
      // A wish is applied once; a skill that exits on its own stays down.
      for (const auto& [name, s] : rt.skills()) {
        const auto want = desired_state(o.assistant_dir, name);
        if (applied[name] == want) continue;
        applied[name] = want;
        if (want == "running") {
          rt.start(name);
        } else {
          rt.stop(name);
        }
      }
      write_status(o.assistant_dir, rt);
    }
    sleep_ms(2);
  }
  rt.stop_all();
  write_status(o.assistant_dir, rt);
  fs::remove(run_dir(o.assistant_dir) / "bus.json");
  fs::remove(run_dir(o.assistant_dir) / "credentials.json");
  handle.stop();
  return 0;
}

// ---- satellite ----------------------------------------------------------

struct SatelliteOptions {
  std::string id;
  std::string wake_word = "computer";
  std::string script;
  std::string assistant_dir;
  int linger_ms = 3000;
};

int cmd_satellite(const SatelliteOptions& o) {
  const auto bus_info = read_json(run_dir(o.assistant_dir) / "bus.json");
  const auto creds = read_json(run_dir(o.assistant_dir) / "credentials.json");
  if (!creds.contains(o.id)) {
    throw Error(Errc::not_found, "the assistant has no credential for satellite '" + o.id +
                                     "'; list it with 'corvid run --satellite " + o.id + "'");
  }
  satellite::SatelliteConfig config{o.id, o.wake_word, bus_info.at("address").get<std::string>(), std::nullopt};
  config.normalize();
  auto session = bus::ClientSession::connect(config.bus_address, "satellite-" + o.id, creds.at(o.id).get<std::string>());
  auto last_activity = system_now_ms();
  satellite::Satellite sat(
      std::move(session), config, system_now_ms,
      [&](const std::string& line) {
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        last_activity = system_now_ms();
      },
      [](const std::string& hint) { std::fprintf(stderr, "%s\n", hint.c_str()); });

  std::optional<satellite::ScriptPlayer> player;
  std::unique_ptr<StdinLines> input;
  if (!o.script.empty()) {
    player.emplace(satellite::parse_script(read_file(o.script), o.script), system_now_ms());
  } else {
    input = std::make_unique<StdinLines>();
  }
  install_signal_handlers();
  while (!g_stop && !sat.session().closed()) {
    if (player) {
      if (player->advance(sat, system_now_ms()) > 0) last_activity = system_now_ms();
    } else {
      while (auto line = input->next()) {
        sat.on_line(*line);
        last_activity = system_now_ms();
      }
    }
    if (sat.poll(std::chrono::milliseconds(5)) > 0) last_activity = system_now_ms();
    const bool finished = player ? player->finished() : input->done();
    if (finished && sat.idle() && system_now_ms() - last_activity > o.linger_ms) break;
  }
  return 0;
}

// ---- dialog -------------------------------------------------------------

int cmd_dialog(const std::string& config_path, const std::string& bus_addr, const std::string& token_file,
               bool check) {
  auto config = dialog::DialogConfig::load(config_path);
  if (check) {
    std::printf("window_ms: %lld\nlanguage: %s\nsatellites: %s\n", static_cast<long long>(config.window_ms),
                config.language.c_str(), join(config.satellites, ", ").c_str());
    return 0;
  }
  if (bus_addr.empty() || token_file.empty()) {
    throw Error(Errc::invalid_argument, "--bus and --admin-token-file are needed unless --check is given");
  }
  auto admin = bus::AdminClient::connect(bus_addr, std::string(trim(read_file(token_file))));
  const auto token = admin.register_client("dialog", bus::Grants::system_grant());
  dialog::DialogService service(bus::ClientSession::connect(bus_addr, "dialog", token), config, system_now_ms,
                                [](const std::string& line) {
                                  std::printf("%s\n", line.c_str());
                                  std::fflush(stdout);
                                });
  install_signal_handlers();
  while (!g_stop && !service.session().closed()) service.poll(std::chrono::milliseconds(20));
  return 0;
}

// ---- skill --------------------------------------------------------------

int cmd_skill_lint(const std::string& path) {
  try {
    const auto bundle = dsl::load_bundle(path);
    const auto diags = dsl::lint_bundle(bundle);
    for (const auto& d : diags) std::printf("%s\n", d.format().c_str());
    if (diags.empty()) std::printf("OK\n");
    return 0;
  } catch (const ParseError& e) {
    for (const auto& d : e.diagnostics()) std::printf("%s\n", d.format().c_str());
    return 1;
  }
}

nlohmann::json read_status(const std::string& dir) {
  const auto p = run_dir(dir) / "status.json";
  if (!fs::exists(p) || !fs::exists(run_dir(dir) / "bus.json")) return nlohmann::json::object();
  return read_json(p);
}

int cmd_skill_install(const std::string& source, const std::string& dir, const std::string& store_addr) {
  const auto status = read_status(dir);
  std::optional<std::string> tmp_root;
  std::string from = source;
  if (!store_addr.empty() || source.find("://") != std::string::npos || source.starts_with("git@")) {
    const auto archive = store_addr.empty() ? store::Archive::parse(store::index_skill(source).archive)
                                            : store::fetch_archive(store_addr, source);
    std::string tmpl = (fs::temp_directory_path() / "corvid-install-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error(Errc::io_error, "cannot create a temporary directory");
    tmp_root = tmpl;
    from = (fs::path(tmpl) / archive.name).string();
    archive.unpack(from);
  }
  struct Cleanup {
    std::optional<std::string>& p;
    ~Cleanup() {
      std::error_code ec;
      if (p) fs::remove_all(*p, ec);
    }
  } cleanup{tmp_root};

  const auto name = dsl::load_bundle(from, source).name;
  if (status.contains(name) && status[name]["state"] == "running") {
    throw Error(Errc::conflict, "skill '" + name + "' is running; stop it before reinstalling");
  }
  runtime::SkillRuntime rt({dir, "", {}}, runtime::Registrar{[](auto&&...) { return std::string(); },
                                                            [](auto&&...) {}});
  const auto& s = rt.install(from);
  std::printf("installed %s into %s\n", s.bundle.name.c_str(), s.bundle.root.c_str());
  for (const auto& w : store::lint_warnings(s.bundle.manifest)) {
    std::printf("  %s [%s] %s\n", std::string(store::to_string(w.kind)).c_str(),
                std::string(store::to_string(w.severity)).c_str(), w.detail.c_str());
  }
  std::printf("run 'corvid train %s' before the next start\n", dir.c_str());
  return 0;
}

int cmd_skill_set(const std::string& name, const std::string& dir, const std::string& want) {
  if (!fs::is_directory(fs::path(dir) / "skills" / name)) {
    throw Error(Errc::not_found, "no installed skill named '" + name + "'");
  }
  write_file(desired_file(dir, name), want + "\n");
  if (!fs::exists(run_dir(dir) / "bus.json")) {
    std::printf("%s will be %s when the assistant runs\n", name.c_str(), want.c_str());
    return 0;
  }
  // The running assistant applies it; wait a little to report the outcome.
  for (int i = 0; i < 60; ++i) {
    sleep_ms(100);
    const auto st = read_status(dir);
    if (st.contains(name) && st[name]["state"] != (want == "running" ? "stopped" : "running")) {
      std::printf("%s %s\n", name.c_str(), st[name]["state"].get<std::string>().c_str());
      return st[name]["state"] == "crashed" ? 1 : 0;
    }
  }
  std::printf("%s requested %s\n", name.c_str(), want.c_str());
  return 0;
}

int cmd_skill_status(const std::string& name, const std::string& dir) {
  runtime::SkillRuntime rt({dir, "", {}}, runtime::Registrar{[](auto&&...) { return std::string(); },
                                                            [](auto&&...) {}});
  rt.load_installed();
  const auto status = read_status(dir);
  int rc = 0;
  for (const auto& [n, s] : rt.skills()) {
    if (!name.empty() && n != name) continue;
    std::string state = "stopped";
    int code = 0;
    if (status.contains(n)) {
      state = status[n]["state"].get<std::string>();
      code = status[n]["exit_code"].get<int>();
    }
    std::printf("%s %s", n.c_str(), state.c_str());
    if (state == "crashed") std::printf(" (exit %d)", code);
    std::printf("\n");
  }
  if (!name.empty() && !rt.skills().contains(name)) {
    std::fprintf(stderr, "corvid: no installed skill named '%s'\n", name.c_str());
    rc = 1;
  }
  return rc;
}

// ---- train / nlu --------------------------------------------------------

int cmd_train(const std::string& dir, int order) {
  runtime::SkillRuntime rt({dir, "", {}}, runtime::Registrar{[](auto&&...) { return std::string(); },
                                                            [](auto&&...) {}});
  rt.load_installed();
  const auto bundles = rt.bundles();
  const auto models = runtime::train_models(bundles, order);
  runtime::save_models(models, models_dir(dir).string());
  std::printf("trained on %zu example(s) from %zu skill(s); models in %s\n", models.examples.size(), bundles.size(),
              models_dir(dir).c_str());
  return 0;
}

nlu::NluModel load_nlu(const std::string& path) { return nlu::NluModel::deserialize(read_file(path)); }

int cmd_nlu_parse(const std::string& model, const std::string& text) {
  std::printf("%s", format_result(load_nlu(model).parse(text)).c_str());
  return 0;
}

int cmd_nlu_eval(const std::string& model, const std::string& testset) {
  std::vector<datagen::TrainingExample> examples;
  std::istringstream in(read_file(testset));
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      examples.push_back(datagen::example_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(testset, line_no, 0, e.what(), "syntax");
    }
  }
  std::printf("%s", nlu::evaluate(load_nlu(model), examples).format().c_str());
  return 0;
}

// ---- store --------------------------------------------------------------

int cmd_store_serve(const std::string& catalog, const std::string& listen, const std::string& ui) {
  store::StoreServer server({catalog, listen, ui, std::chrono::milliseconds(1000)});
  const auto snap = server.catalog().snapshot();
  for (const auto& r : snap->rejected) std::fprintf(stderr, "rejected %s\n", r.c_str());
  std::printf("store serving %zu skill(s) on http://%s\n", snap->skills.size(), server.address().c_str());
  std::fflush(stdout);
  install_signal_handlers();
  while (!g_stop) sleep_ms(50);
  server.stop();
  return 0;
}

int cmd_store_add(const std::string& source, const std::string& catalog) {
  store::Catalog cat(catalog);
  const auto entry = cat.add(store::index_skill(source));
  std::printf("added %s (sha256 %s)\n", entry.name.c_str(), entry.sha256.c_str());
  for (const auto& w : entry.warnings) {
    std::printf("  %s [%s] %s\n", std::string(store::to_string(w.kind)).c_str(),
                std::string(store::to_string(w.severity)).c_str(), w.detail.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corvid: offline voice assistant framework"};
  app.require_subcommand(1);
  std::function<int()> action;

  auto* bus_cmd = app.add_subcommand("bus", "Run a standalone message bus");
  std::string bus_listen = "127.0.0.1:7420", token_file;
  bus_cmd->add_option("--listen", bus_listen, "host:port to listen on");
  bus_cmd->add_option("--admin-token-file", token_file, "Where to write the admin token");
  bus_cmd->callback([&] { action = [&] { return cmd_bus(bus_listen, token_file); }; });

  auto* run_cmd = app.add_subcommand("run", "Run the assistant with its installed skills");
  RunOptions run;
  run_cmd->add_option("--assistant-dir", run.assistant_dir, "Assistant directory")->required();
  run_cmd->add_option("--listen", run.listen, "Bus address");
  run_cmd->add_option("--config", run.config, "Dialog configuration (YAML)");
  run_cmd->add_option("--satellite", run.satellites, "Satellite id to accept (repeatable)");
  run_cmd->add_option("--path", run.path, "Directory searched first for skill commands (repeatable)");
  run_cmd->add_flag("--verbose,-v", run.verbose, "Print dialog transitions");
  run_cmd->callback([&] { action = [&] { return cmd_run(run); }; });

  auto* sat_cmd = app.add_subcommand("satellite", "Text satellite for one room");
  SatelliteOptions sat;
  sat_cmd->add_option("--id", sat.id, "Satellite id")->required();
  sat_cmd->add_option("--wake-word", sat.wake_word, "Wake word");
  sat_cmd->add_option("--script", sat.script, "Script of '+ms text' lines instead of stdin");
  sat_cmd->add_option("--assistant-dir", sat.assistant_dir, "Directory of the running assistant")->required();
  sat_cmd->add_option("--linger", sat.linger_ms, "Quiet milliseconds before exiting after the input ends");
  sat_cmd->callback([&] { action = [&] { return cmd_satellite(sat); }; });

  auto* dialog_cmd = app.add_subcommand("dialog", "Run the dialog manager against a standalone bus");
  std::string dialog_config, dialog_bus, dialog_token;
  bool dialog_check = false;
  dialog_cmd->add_option("--config", dialog_config, "Dialog configuration (YAML)")->required();
  dialog_cmd->add_option("--bus", dialog_bus, "Bus address");
  dialog_cmd->add_option("--admin-token-file", dialog_token, "Admin token written by 'corvid bus'");
  dialog_cmd->add_flag("--check", dialog_check, "Validate the configuration and exit");
  dialog_cmd->callback(
      [&] { action = [&] { return cmd_dialog(dialog_config, dialog_bus, dialog_token, dialog_check); }; });

  auto* skill_cmd = app.add_subcommand("skill", "Manage skills");
  skill_cmd->require_subcommand(1);
  std::string skill_arg, skill_dir, skill_store;
  auto* lint = skill_cmd->add_subcommand("lint", "Check a skill bundle");
  lint->add_option("path", skill_arg)->required();
  lint->callback([&] { action = [&] { return cmd_skill_lint(skill_arg); }; });
  auto* install = skill_cmd->add_subcommand("install", "Install a skill from a directory, git url or store");
  install->add_option("source", skill_arg, "Directory, git url, or skill name with --store")->required();
  install->add_option("--assistant-dir", skill_dir)->required();
  install->add_option("--store", skill_store, "Store address (host:port)");
  install->callback([&] { action = [&] { return cmd_skill_install(skill_arg, skill_dir, skill_store); }; });
  for (const auto* verb : {"start", "stop"}) {
    auto* c = skill_cmd->add_subcommand(verb, std::string(verb) + " a skill's action");
    c->add_option("name", skill_arg)->required();
    c->add_option("--assistant-dir", skill_dir)->required();
    const std::string want = std::string(verb) == "start" ? "running" : "stopped";
    c->callback([&, want] { action = [&, want] { return cmd_skill_set(skill_arg, skill_dir, want); }; });
  }
  auto* status = skill_cmd->add_subcommand("status", "Show skill states");
  status->add_option("name", skill_arg);
  status->add_option("--assistant-dir", skill_dir)->required();
  status->callback([&] { action = [&] { return cmd_skill_status(skill_arg, skill_dir); }; });

  auto* train_cmd = app.add_subcommand("train", "Generate training data and train the models");
  std::string train_dir;
  int order = runtime::kDefaultLmOrder;
  train_cmd->add_option("assistant-dir", train_dir)->required();
  train_cmd->add_option("--order", order, "n-gram order")->check(CLI::Range(1, 6));
  train_cmd->callback([&] { action = [&] { return cmd_train(train_dir, order); }; });

  auto* nlu_cmd = app.add_subcommand("nlu", "Query or evaluate an NLU model");
  nlu_cmd->require_subcommand(1);
  std::string nlu_model, nlu_text, nlu_testset;
  auto* parse = nlu_cmd->add_subcommand("parse", "Parse one utterance");
  parse->add_option("--model", nlu_model, "nlu.bin")->required();
  parse->add_option("text", nlu_text)->required();
  parse->callback([&] { action = [&] { return cmd_nlu_parse(nlu_model, nlu_text); }; });
  auto* eval = nlu_cmd->add_subcommand("eval", "Evaluate against labelled examples");
  eval->add_option("--model", nlu_model, "nlu.bin")->required();
  eval->add_option("--testset", nlu_testset, "JSON lines of training examples")->required();
  eval->callback([&] { action = [&] { return cmd_nlu_eval(nlu_model, nlu_testset); }; });

  auto* store_cmd = app.add_subcommand("store", "Skill store");
  store_cmd->require_subcommand(1);
  std::string catalog = "catalog", store_listen = "127.0.0.1:7421", ui_dir, store_source;
  auto* serve = store_cmd->add_subcommand("serve", "Serve a catalog over HTTP");
  serve->add_option("--catalog", catalog, "Catalog directory");
  serve->add_option("--listen", store_listen, "host:port");
  serve->add_option("--ui", ui_dir, "Static files of the browser frontend");
  serve->callback([&] { action = [&] { return cmd_store_serve(catalog, store_listen, ui_dir); }; });
  auto* add = store_cmd->add_subcommand("add", "Index a skill into a catalog");
  add->add_option("source", store_source, "Directory or git url")->required();
  add->add_option("--catalog", catalog, "Catalog directory");
  add->callback([&] { action = [&] { return cmd_store_add(store_source, catalog); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const ParseError& e) {
    for (const auto& d : e.diagnostics()) std::fprintf(stderr, "%s\n", d.format().c_str());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "corvid: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "corvid: %s\n", e.what());
    return 1;
  }
}
