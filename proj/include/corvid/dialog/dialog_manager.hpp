#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "corvid/bus/payload.hpp"
#include "corvid/bus/topic.hpp"
#include "corvid/common/text.hpp"
#include "corvid/dialog/config.hpp"
#include "corvid/nlu/model.hpp"

namespace corvid::dialog {

enum class State { listening, transcribing, understanding, acting, responding, done, failed };

std::string_view to_string(State s);
bool is_terminal(State s);

struct DialogSession {
  std::string session_id;
  std::string satellite;
  State state = State::listening;
  std::string failure_reason;  // set only when state == failed
  Millis started_at = 0;
  Millis entered_at = 0;  // when the current state was entered
  Millis deadline = 0;    // 0: none
  std::string intent_topic;

  bool operator==(const DialogSession&) const = default;
};

struct Started {
  DialogSession session;
};
struct Suppressed {
  std::string satellite;
  std::string reason;  // "arbitration" or "unknown-satellite"
};
using SessionDecision = std::variant<Started, Suppressed>;

// A message the manager wants published. The service wrapper drains these.
struct Outbound {
  bus::TopicName topic;
  bus::Payload payload;
};

// One state change, also rendered as a structured log line.
struct Transition {
  Millis at = 0;
  std::string session_id;
  std::string satellite;
  State from = State::listening;
  State to = State::listening;
  std::string reason;

  std::string format() const;
};

// Session state machine of the assistant. Single-threaded: every entry point
// is an event from the bus or a tick, and time comes only from the clock
// passed in, so a whole run can be replayed.
//
// Wake detections open an arbitration window of config.window_ms. When it
// closes (on the first tick at or after its end) the detection with the
// smallest timestamp wins, ties going to the smaller satellite id; every other
// detection in the window is suppressed.
class DialogManager {
 public:
  using SubscriberCount = std::function<std::size_t(const bus::TopicName&)>;

  DialogManager(DialogConfig config, Clock clock, SubscriberCount subscribers);

  void add_satellite(const std::string& id);
  const std::set<std::string>& satellites() const { return satellites_; }

  // Qualified intent id -> topic the handling skill subscribes to. Intents
  // without an entry use the part after the first '-'.
  void set_intent_topic(const std::string& intent_id, const std::string& topic);
  std::string intent_topic(const std::string& intent_id) const;

  // Returns a decision only when it can be made at once (unknown satellite);
  // otherwise the detection waits for its window, or for the satellite's
  // current session to end.
  std::optional<SessionDecision> on_wake_detected(const std::string& satellite, Millis t);
  void on_transcription(const std::string& session_id, const std::string& text);
  void on_intent(const std::string& session_id, const std::optional<nlu::IntentResult>& result);
  void on_skill_answer(const std::string& session_id, const std::string& text, const std::string& satellite);
  void on_tts_done(const std::string& session_id);

  // Closes a due arbitration window and expires sessions past their deadline.
  // Returns the sessions that expired.
  std::vector<DialogSession> tick(Millis now);

  std::vector<SessionDecision> take_decisions();
  std::vector<Outbound> take_outbox();
  std::vector<Transition> take_transitions();

  const std::map<std::string, DialogSession>& sessions() const { return sessions_; }
  std::optional<DialogSession> active_session(const std::string& satellite) const;
  // Earliest instant at which tick() could change something; nullopt if idle.
  std::optional<Millis> next_deadline() const;
  // Events that arrived for unknown or finished sessions.
  std::uint64_t dropped() const { return dropped_; }
  const DialogConfig& config() const { return config_; }

 private:
  DialogSession& enter(DialogSession& s, State to, const std::string& reason = {});
  void fail(DialogSession& s, const std::string& reason, const std::string& answer);
  void finish(DialogSession& s);
  void publish(std::string_view topic, bus::PayloadKind kind, const DialogSession& s, nlohmann::json body);
  void say(const DialogSession& s, const std::string& text);
  void close_window();
  void request_detection(const std::string& satellite, Millis t);
  DialogSession* find(const std::string& session_id, State expected);

  DialogConfig config_;
  Clock clock_;
  SubscriberCount subscribers_;
  std::set<std::string> satellites_;
  std::map<std::string, std::string> intent_topics_;

  struct Window {
    Millis closes_at = 0;
    std::map<std::string, Millis> detections;  // satellite -> earliest timestamp
  };
  std::optional<Window> window_;
  std::map<std::string, Millis> queued_;  // busy satellite -> detection time
  std::map<std::string, std::string> active_;  // satellite -> session id
  std::map<std::string, DialogSession> sessions_;
  std::uint64_t next_session_ = 1;
  std::uint64_t dropped_ = 0;
  Millis now_ = 0;  // time of the event being handled
  // Finished sessions stay queryable for a while, oldest evicted first.
  static constexpr std::size_t kKeepFinished = 1024;
  std::deque<std::string> finished_;

  std::vector<SessionDecision> decisions_;
  std::vector<Outbound> outbox_;
  std::vector<Transition> transitions_;
};

}  // namespace corvid::dialog
