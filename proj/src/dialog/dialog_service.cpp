#include "corvid/dialog/dialog_service.hpp"

#include "corvid/common/error.hpp"

namespace corvid::dialog {

DialogService::DialogService(bus::ClientSession session, DialogConfig config, Clock clock, LogSink log)
    : session_(std::move(session)),
      clock_(clock),
      manager_(std::move(config), clock, [this](const bus::TopicName& t) { return session_.subscriber_count(t); }),
      log_(std::move(log)) {
  subscribe();
}

void DialogService::subscribe() {
  using bus::TopicName;
  namespace topics = bus::topics;
  auto guarded = [this](auto fn) {
    return [this, fn](const bus::Message& m) {
      try {
        fn(m);
      } catch (const nlohmann::json::exception&) {
        ++malformed_;
      } catch (const Error&) {
        ++malformed_;
      }
    };
  };
  session_.subscribe(TopicName::parse(topics::kWakeDetected), guarded([this](const bus::Message& m) {
    manager_.on_wake_detected(m.payload.satellite, m.payload.body.at("timestamp").get<Millis>());
  }));
  session_.subscribe(TopicName::parse(topics::kTranscription), guarded([this](const bus::Message& m) {
    manager_.on_transcription(m.payload.session_id, m.payload.body.at("text").get<std::string>());
  }));
  session_.subscribe(TopicName::parse(topics::kNluResult), guarded([this](const bus::Message& m) {
    const auto& r = m.payload.body.at("result");
    std::optional<nlu::IntentResult> result;
    if (!r.is_null()) result = nlu::intent_result_from_json(r);
    manager_.on_intent(m.payload.session_id, result);
  }));
  session_.subscribe(TopicName::parse(topics::kSayText), guarded([this](const bus::Message& m) {
    manager_.on_skill_answer(m.payload.session_id, m.payload.body.at("text").get<std::string>(),
                             m.payload.satellite);
  }));
  session_.subscribe(TopicName::parse(topics::kTtsDone), guarded([this](const bus::Message& m) {
    manager_.on_tts_done(m.payload.session_id);
  }));
}

std::size_t DialogService::flush() {
  std::size_t n = 0;
  for (const auto& t : manager_.take_transitions()) {
    if (log_) log_(t.format());
  }
  manager_.take_decisions();
  for (const auto& out : manager_.take_outbox()) {
    session_.publish(out.topic, out.payload);
    ++n;
  }
  return n;
}

std::size_t DialogService::poll() {
  auto n = session_.dispatch();
  manager_.tick(clock_());
  return n + flush();
}

std::size_t DialogService::poll(std::chrono::milliseconds wait) {
  auto n = session_.wait_and_dispatch(wait);
  manager_.tick(clock_());
  return n + flush();
}

}  // namespace corvid::dialog
