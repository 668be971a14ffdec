#include "corvid/runtime/assistant_host.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "corvid/common/error.hpp"
#include "corvid/runtime/skill_runtime.hpp"

namespace corvid::runtime {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp);
    out << bytes;
    if (!out.flush()) throw Error(Errc::io_error, "cannot write " + tmp);
  }
  fs::rename(tmp, p);
}

}  // namespace

Models train_models(const std::vector<dsl::SkillBundle>& skills, int lm_order, const datagen::ExpandLimits& limits) {
  Models m;
  for (const auto& b : skills) {
    auto part = datagen::expand(b, limits);
    m.examples.insert(m.examples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (m.examples.empty()) return m;
  m.nlu = nlu::NluModel::train(m.examples, skills);
  m.lm = datagen::build_lm(m.examples, lm_order);
  return m;
}

void save_models(const Models& m, const std::string& dir) {
  fs::create_directories(dir);
  std::string jsonl;
  for (const auto& e : m.examples) jsonl += datagen::to_json(e).dump() + "\n";
  write_file(fs::path(dir) / "nlu_examples.jsonl", jsonl);
  write_file(fs::path(dir) / "nlu.bin", m.nlu.serialize());
  if (m.lm) {
    write_file(fs::path(dir) / "lm.bin", m.lm->serialize());
  } else {
    fs::remove(fs::path(dir) / "lm.bin");
  }
}

Models load_models(const std::string& dir) {
  Models m;
  m.nlu = nlu::NluModel::deserialize(read_file(fs::path(dir) / "nlu.bin"));
  const auto lm = fs::path(dir) / "lm.bin";
  if (fs::exists(lm)) m.lm = datagen::NgramModel::deserialize(read_file(lm));
  return m;
}

LocalAssistant::LocalAssistant(std::shared_ptr<bus::Broker> broker, const std::vector<dsl::SkillBundle>& skills,
                               Models models, Options options, Clock clock)
    : broker_(std::move(broker)), clock_(std::move(clock)) {
  const auto system = bus::Grants::system_grant();
  dialog_ = std::make_unique<dialog::DialogService>(broker_->register_client("dialog", system, clock_),
                                                    std::move(options.dialog), clock_, std::move(options.log));
  for (const auto& b : skills) {
    for (const auto& intent : b.intents) dialog_->manager().set_intent_topic(intent.qualified_id(), intent.intent_name);
  }
  stt_ = std::make_unique<satellite::SttService>(broker_->register_client("stt", system, clock_),
                                                 std::move(models.lm), options.weights);
  nlu_ = std::make_unique<satellite::NluService>(broker_->register_client("nlu", system, clock_),
                                                 std::move(models.nlu));
  tts_ = std::make_unique<satellite::TtsService>(broker_->register_client("tts", system, clock_));
}

satellite::Satellite& LocalAssistant::add_satellite(satellite::SatelliteConfig config, satellite::LineSink out,
                                                    satellite::LineSink hint) {
  config.normalize();
  if (satellites_.contains(config.id)) throw Error(Errc::duplicate_client, "satellite '" + config.id + "' exists");
  auto session = broker_->register_client("satellite-" + config.id, satellite::satellite_grants(), clock_);
  dialog_->manager().add_satellite(config.id);
  const auto id = config.id;
  auto sat = std::make_unique<satellite::Satellite>(std::move(session), std::move(config), clock_, std::move(out),
                                                    std::move(hint));
  return *satellites_.emplace(id, std::move(sat)).first->second;
}

sdk::Assistant& LocalAssistant::add_skill(const dsl::SkillBundle& bundle) {
  auto session = broker_->register_client("skill-" + bundle.name, grants_for(bundle.manifest), clock_);
  const auto path = (fs::path(bundle.root) / "config.yaml").string();
  skills_.push_back(std::make_unique<sdk::Assistant>(std::move(session), bundle.manifest, path));
  return *skills_.back();
}

std::size_t LocalAssistant::poll() {
  std::size_t n = dialog_->poll() + stt_->poll() + nlu_->poll() + tts_->poll();
  for (auto& [id, s] : satellites_) n += s->poll();
  for (auto& s : skills_) n += s->poll();
  return n;
}

std::size_t LocalAssistant::settle(std::size_t max_rounds) {
  std::size_t total = 0;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    const auto n = poll();
    if (n == 0) return total;
    total += n;
  }
  throw Error(Errc::precondition, "bus traffic did not settle");
}

Simulation::Simulation(const std::vector<dsl::SkillBundle>& skills, Models models, LocalAssistant::Options options) {
  auto user_log = std::move(options.log);
  options.log = [this, user_log](const std::string& line) {
    log_.push_back(line);
    if (user_log) user_log(line);
  };
  assistant_ = std::make_unique<LocalAssistant>(bus::Broker::create(), skills, std::move(models), std::move(options),
                                                [this] { return now_; });
}

satellite::Satellite& Simulation::add_satellite(const std::string& id, std::vector<satellite::ScriptLine> script,
                                                const std::string& wake_word) {
  satellite::SatelliteConfig c;
  c.id = id;
  c.wake_word = wake_word;
  auto& sat = assistant_->add_satellite(c, [this, id](const std::string& line) {
    outputs_[id].push_back(line);
    transcript_.push_back(id + "| " + line);
  });
  outputs_[id];
  players_.emplace(id, satellite::ScriptPlayer(std::move(script), now_));
  return sat;
}

bool Simulation::busy() const {
  for (const auto& [id, p] : players_) {
    if (!p.finished()) return true;
  }
  return assistant_->dialog().manager().next_deadline().has_value();
}

void Simulation::run(Millis limit, Millis step) {
  const auto end = now_ + limit;
  assistant_->settle();
  while (now_ <= end) {
    for (auto& [id, p] : players_) p.advance(assistant_->satellite(id), now_);
    assistant_->settle();
    if (!busy()) return;
    now_ += step;
  }
}

const std::vector<std::string>& Simulation::output(const std::string& id) const { return outputs_.at(id); }

}  // namespace corvid::runtime
