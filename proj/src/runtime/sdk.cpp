#include "corvid/runtime/sdk.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "corvid/common/error.hpp"
#include "corvid/dsl/parse.hpp"

namespace corvid::sdk {

namespace {

std::string require_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) throw Error(Errc::malformed_config, std::string("environment variable ") + name + " is not set");
  return v;
}

}  // namespace

SkillMessage SkillMessage::from_payload(const bus::Payload& p) {
  SkillMessage m;
  m.raw = p.body;
  const auto r = nlu::intent_result_from_json(p.body);
  m.intent_id = r.intent_id;
  m.entities = r.entities;
  m.satellite = p.body.value("satellite", p.satellite);
  m.session_id = p.body.value("session", p.session_id);
  if (m.satellite.empty() || m.session_id.empty()) {
    throw Error(Errc::parse_error, "skill message without satellite or session");
  }
  m.raw["satellite"] = m.satellite;
  m.raw["session"] = m.session_id;
  return m;
}

Assistant::Assistant(bus::ClientSession session, dsl::SkillManifest manifest, std::string manifest_path)
    : session_(std::move(session)), manifest_(std::move(manifest)), manifest_path_(std::move(manifest_path)) {}

Assistant Assistant::from_environment() {
  const auto dir = require_env(kEnvSkillDir);
  const auto path = dir + "/config.yaml";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto manifest = dsl::parse_manifest(ss.str(), path);
  auto session = bus::ClientSession::connect(require_env(kEnvBusAddr), require_env(kEnvClientId),
                                             require_env(kEnvClientToken));
  return Assistant(std::move(session), std::move(manifest), path);
}

void Assistant::add_topic_callback(const std::string& topic, Callback callback) {
  const auto name = bus::TopicName::try_parse(topic);
  if (!name || !manifest_.topics_read.contains(*name)) {
    throw Error(Errc::permission_denied,
                "topic '" + topic + "' is not listed in topics_read of " + manifest_path_);
  }
  auto& list = callbacks_[topic];
  list.push_back(std::move(callback));
  if (list.size() > 1) return;
  session_.subscribe(*name, [this, topic](const bus::Message& m) {
    SkillMessage msg;
    try {
      msg = SkillMessage::from_payload(m.payload);
    } catch (const Error&) {
      ++malformed_;
      return;
    }
    last_session_[msg.satellite] = msg.session_id;
    current_ = &msg;
    struct Reset {
      const SkillMessage*& p;
      ~Reset() { p = nullptr; }
    } reset{current_};
    for (const auto& cb : callbacks_.at(topic)) cb(msg);
  });
}

std::vector<nlu::Entity> Assistant::extract_entities(const SkillMessage& msg, const std::string& intent_id) const {
  if (msg.intent_id != intent_id) return {};
  return msg.entities;
}

void Assistant::publish_answer(const std::string& text, const std::string& satellite) {
  const auto topic = bus::TopicName::parse(bus::topics::kSayText);
  if (!manifest_.topics_write.contains(topic)) {
    throw Error(Errc::permission_denied,
                "answering needs '" + topic.str() + "' in topics_write of " + manifest_path_);
  }
  std::string session;
  if (current_ && current_->satellite == satellite) {
    session = current_->session_id;
  } else if (auto it = last_session_.find(satellite); it != last_session_.end()) {
    session = it->second;
  } else {
    throw Error(Errc::precondition, "no session seen for satellite '" + satellite + "'");
  }
  session_.publish(topic, bus::Payload{bus::PayloadKind::skill_answer, session, satellite, {{"text", text}}});
}

std::size_t Assistant::poll() { return session_.dispatch(); }
std::size_t Assistant::poll(std::chrono::milliseconds wait) { return session_.wait_and_dispatch(wait); }

void Assistant::run(const std::atomic<bool>* stop) {
  while (!session_.closed() && !(stop && stop->load())) poll(std::chrono::milliseconds(100));
}

}  // namespace corvid::sdk
