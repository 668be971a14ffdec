#include "corvid/dialog/dialog_manager.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "corvid/common/error.hpp"

namespace corvid::dialog {

std::string_view to_string(State s) {
  switch (s) {
    case State::listening: return "listening";
    case State::transcribing: return "transcribing";
    case State::understanding: return "understanding";
    case State::acting: return "acting";
    case State::responding: return "responding";
    case State::done: return "done";
    case State::failed: return "failed";
  }
  return "unknown";
}

bool is_terminal(State s) { return s == State::done || s == State::failed; }

std::string Transition::format() const {
  auto line = fmt::format("dialog t={} session={} satellite={} from={} to={}", at, session_id, satellite,
                          to_string(from), to_string(to));
  if (!reason.empty()) line += " reason=" + reason;
  return line;
}

DialogManager::DialogManager(DialogConfig config, Clock clock, SubscriberCount subscribers)
    : config_(std::move(config)), clock_(std::move(clock)), subscribers_(std::move(subscribers)) {
  if (!clock_) throw Error(Errc::invalid_argument, "dialog manager needs a clock");
  for (const auto& s : config_.satellites) add_satellite(s);
}

void DialogManager::add_satellite(const std::string& id) {
  if (id.empty()) throw Error(Errc::invalid_argument, "satellite id must not be empty");
  satellites_.insert(id);
}

void DialogManager::set_intent_topic(const std::string& intent_id, const std::string& topic) {
  intent_topics_[intent_id] = topic;
}

std::string DialogManager::intent_topic(const std::string& intent_id) const {
  if (auto it = intent_topics_.find(intent_id); it != intent_topics_.end()) return it->second;
  const auto dash = intent_id.find('-');
  return dash == std::string::npos ? intent_id : intent_id.substr(dash + 1);
}

std::optional<SessionDecision> DialogManager::on_wake_detected(const std::string& satellite, Millis t) {
  if (!satellites_.contains(satellite)) {
    SessionDecision d = Suppressed{satellite, "unknown-satellite"};
    decisions_.push_back(d);
    ++dropped_;
    return d;
  }
  now_ = clock_();
  // A due window closes first; its winner may be this very satellite.
  close_window();
  if (active_.contains(satellite)) {
    // Busy: the detection waits until the current session is over.
    auto [it, inserted] = queued_.emplace(satellite, t);
    if (!inserted) it->second = std::min(it->second, t);
    return std::nullopt;
  }
  request_detection(satellite, t);
  return std::nullopt;
}

void DialogManager::request_detection(const std::string& satellite, Millis t) {
  close_window();
  if (!window_) window_ = Window{now_ + config_.window_ms, {}};
  auto [it, inserted] = window_->detections.emplace(satellite, t);
  if (!inserted) it->second = std::min(it->second, t);
}

void DialogManager::close_window() {
  if (!window_ || now_ < window_->closes_at) return;
  const auto now = now_;
  const auto w = std::move(*window_);
  window_.reset();

  auto winner = w.detections.begin();
  for (auto it = w.detections.begin(); it != w.detections.end(); ++it) {
    // Map order is by id, so strict < keeps the smaller id on equal times.
    if (it->second < winner->second) winner = it;
  }

  DialogSession s;
  s.session_id = fmt::format("session-{}", next_session_++);
  s.satellite = winner->first;
  s.started_at = now;
  s.entered_at = now;
  auto& session = sessions_.emplace(s.session_id, s).first->second;
  active_[session.satellite] = session.session_id;
  transitions_.push_back({now, session.session_id, session.satellite, State::listening, State::listening,
                          fmt::format("won-arbitration detected={}", winner->second)});

  for (const auto& [sat, t] : w.detections) {
    if (sat == session.satellite) continue;
    decisions_.push_back(Suppressed{sat, "arbitration"});
    bus::Payload p{bus::PayloadKind::session_end, session.session_id, sat,
                   {{"state", "suppressed"}, {"reason", "arbitration"}, {"winner", session.satellite}}};
    outbox_.push_back({bus::TopicName::parse(bus::topics::kSessionEnd), std::move(p)});
  }

  publish(bus::topics::kSttActivate, bus::PayloadKind::stt_activate, session,
          {{"stream", std::string(bus::topics::kAudioStream)}});
  enter(session, State::transcribing);
  decisions_.push_back(Started{session});
}

DialogSession* DialogManager::find(const std::string& session_id, State expected) {
  now_ = clock_();
  auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.state != expected) {
    ++dropped_;
    return nullptr;
  }
  return &it->second;
}

void DialogManager::on_transcription(const std::string& session_id, const std::string& text) {
  auto* s = find(session_id, State::transcribing);
  if (!s) return;
  if (trim(text).empty()) {
    fail(*s, "empty-transcription", config_.phrases().empty_transcription);
    return;
  }
  enter(*s, State::understanding);
  publish(bus::topics::kNluRequest, bus::PayloadKind::transcription, *s, {{"text", text}});
}

void DialogManager::on_intent(const std::string& session_id, const std::optional<nlu::IntentResult>& result) {
  auto* s = find(session_id, State::understanding);
  if (!s) return;
  if (!result) {
    fail(*s, "no-match", config_.phrases().no_match);
    return;
  }
  const auto topic = bus::TopicName::try_parse(intent_topic(result->intent_id));
  if (!topic) {
    fail(*s, "no-handler", config_.phrases().no_handler);
    return;
  }
  s->intent_topic = topic->str();
  enter(*s, State::acting, result->intent_id);
  auto body = nlu::to_json(*result);
  body["satellite"] = s->satellite;
  body["session"] = s->session_id;
  publish(topic->str(), bus::PayloadKind::intent_result, *s, std::move(body));
}

void DialogManager::on_skill_answer(const std::string& session_id, const std::string& text,
                                    const std::string& satellite) {
  auto* s = find(session_id, State::acting);
  if (!s) return;
  // The answer always goes back where the request came from.
  enter(*s, State::responding, satellite == s->satellite ? std::string() : "satellite-mismatch:" + satellite);
  say(*s, text);
}

void DialogManager::on_tts_done(const std::string& session_id) {
  now_ = clock_();
  auto it = sessions_.find(session_id);
  // Fallback answers of failed sessions also produce a done event.
  if (it != sessions_.end() && it->second.state == State::failed) return;
  auto* s = find(session_id, State::responding);
  if (!s) return;
  enter(*s, State::done);
  finish(*s);
}

std::vector<DialogSession> DialogManager::tick(Millis now) {
  now_ = now;
  std::vector<DialogSession> expired;
  std::vector<std::string> due;
  for (const auto& [sat, id] : active_) {
    const auto& s = sessions_.at(id);
    if (s.deadline != 0 && now >= s.deadline) due.push_back(id);
  }
  for (const auto& id : due) {
    auto& s = sessions_.at(id);
    if (s.state == State::acting) {
      const auto topic = bus::TopicName::parse(s.intent_topic);
      const bool handled = subscribers_ && subscribers_(topic) > 0;
      fail(s, handled ? "timeout" : "no-handler", config_.phrases().no_handler);
    } else {
      fail(s, "timeout", {});
    }
    expired.push_back(s);
  }
  close_window();
  return expired;
}

DialogSession& DialogManager::enter(DialogSession& s, State to, const std::string& reason) {
  const auto now = now_;
  transitions_.push_back({now, s.session_id, s.satellite, s.state, to, reason});
  s.state = to;
  s.entered_at = now;
  switch (to) {
    case State::transcribing: s.deadline = now + config_.deadlines.transcribing; break;
    case State::understanding: s.deadline = now + config_.deadlines.understanding; break;
    case State::acting: s.deadline = now + config_.deadlines.acting; break;
    case State::responding: s.deadline = now + config_.deadlines.responding; break;
    default: s.deadline = 0;
  }
  return s;
}

void DialogManager::fail(DialogSession& s, const std::string& reason, const std::string& answer) {
  s.failure_reason = reason;
  enter(s, State::failed, reason);
  if (!answer.empty()) say(s, answer);
  finish(s);
}

void DialogManager::finish(DialogSession& s) {
  nlohmann::json body{{"state", std::string(to_string(s.state))}};
  if (!s.failure_reason.empty()) body["reason"] = s.failure_reason;
  publish(bus::topics::kSessionEnd, bus::PayloadKind::session_end, s, std::move(body));
  active_.erase(s.satellite);
  if (auto q = queued_.find(s.satellite); q != queued_.end()) {
    const auto t = q->second;
    queued_.erase(q);
    request_detection(s.satellite, t);
  }
  finished_.push_back(s.session_id);
  while (finished_.size() > kKeepFinished) {
    sessions_.erase(finished_.front());
    finished_.pop_front();
  }
}

void DialogManager::publish(std::string_view topic, bus::PayloadKind kind, const DialogSession& s,
                            nlohmann::json body) {
  outbox_.push_back({bus::TopicName::parse(topic), bus::Payload{kind, s.session_id, s.satellite, std::move(body)}});
}

void DialogManager::say(const DialogSession& s, const std::string& text) {
  publish(bus::topics::kTtsSay, bus::PayloadKind::say_text, s, {{"text", text}});
}

std::vector<SessionDecision> DialogManager::take_decisions() { return std::exchange(decisions_, {}); }
std::vector<Outbound> DialogManager::take_outbox() { return std::exchange(outbox_, {}); }
std::vector<Transition> DialogManager::take_transitions() { return std::exchange(transitions_, {}); }

std::optional<DialogSession> DialogManager::active_session(const std::string& satellite) const {
  auto it = active_.find(satellite);
  if (it == active_.end()) return std::nullopt;
  return sessions_.at(it->second);
}

std::optional<Millis> DialogManager::next_deadline() const {
  std::optional<Millis> best;
  auto consider = [&](Millis t) {
    if (!best || t < *best) best = t;
  };
  if (window_) consider(window_->closes_at);
  for (const auto& [sat, id] : active_) {
    const auto& s = sessions_.at(id);
    if (s.deadline != 0) consider(s.deadline);
  }
  return best;
}

}  // namespace corvid::dialog
