#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "corvid/bus/broker.hpp"
#include "corvid/dsl/ast.hpp"
#include "corvid/nlu/model.hpp"

namespace corvid::sdk {

// What a skill callback receives: the intent published by the dialog manager.
struct SkillMessage {
  std::string intent_id;
  std::vector<nlu::Entity> entities;
  std::string satellite;
  std::string session_id;
  nlohmann::json raw;  // the full payload body

  // msg["satellite"], msg["intent"], ... as in the payload body.
  const nlohmann::json& operator[](const std::string& key) const { return raw.at(key); }

  // Throws Error(parse_error) when satellite or session is missing.
  static SkillMessage from_payload(const bus::Payload& p);
};

using Callback = std::function<void(const SkillMessage&)>;

// Environment variables handed to a skill's action process.
inline constexpr const char* kEnvBusAddr = "CORVID_BUS_ADDR";
inline constexpr const char* kEnvClientId = "CORVID_CLIENT_ID";
inline constexpr const char* kEnvClientToken = "CORVID_CLIENT_TOKEN";
inline constexpr const char* kEnvSkillDir = "CORVID_SKILL_DIR";

// A skill's handle on the assistant. Handlers run serially on the thread that
// calls poll() or run().
class Assistant {
 public:
  Assistant(bus::ClientSession session, dsl::SkillManifest manifest, std::string manifest_path);

  // Connects with the credentials from the environment and reads the
  // manifest from $CORVID_SKILL_DIR/config.yaml.
  static Assistant from_environment();

  // Fails fast with Error(permission_denied) naming the manifest when `topic`
  // is not in its topics_read. Several callbacks on one topic run in
  // registration order.
  void add_topic_callback(const std::string& topic, Callback callback);

  // The message's entities when it carries `intent_id`, else none.
  std::vector<nlu::Entity> extract_entities(const SkillMessage& msg, const std::string& intent_id) const;

  // Publishes an answer for `satellite`. The session is the message being
  // handled, or the last one seen from that satellite (Error(precondition)
  // when there is none). Throws Error(permission_denied) without a write
  // grant for the answer topic.
  void publish_answer(const std::string& text, const std::string& satellite);

  std::size_t poll();
  std::size_t poll(std::chrono::milliseconds wait);
  // Serves until the bus connection closes or `stop` becomes true.
  void run(const std::atomic<bool>* stop = nullptr);

  bus::ClientSession& session() { return session_; }
  const dsl::SkillManifest& manifest() const { return manifest_; }
  // Payloads that could not be turned into a SkillMessage.
  std::uint64_t malformed() const { return malformed_; }

 private:
  bus::ClientSession session_;
  dsl::SkillManifest manifest_;
  std::string manifest_path_;
  std::map<std::string, std::vector<Callback>> callbacks_;
  const SkillMessage* current_ = nullptr;
  std::map<std::string, std::string> last_session_;  // satellite -> session id
  std::uint64_t malformed_ = 0;
};

}  // namespace corvid::sdk
