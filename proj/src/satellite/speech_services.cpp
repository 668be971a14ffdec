#include "corvid/satellite/speech_services.hpp"

#include <algorithm>

#include "corvid/common/error.hpp"

namespace corvid::satellite {

namespace {

bus::TopicName topic(std::string_view t) { return bus::TopicName::parse(t); }

}  // namespace

SttService::SttService(bus::ClientSession session, std::optional<datagen::NgramModel> lm,
                       datagen::RescoreWeights weights)
    : session_(std::move(session)), lm_(std::move(lm)), weights_(weights) {
  session_.subscribe(topic(bus::topics::kSttActivate), [this](const bus::Message& m) {
    active_[m.payload.satellite] = m.payload.session_id;
  });
  session_.subscribe(topic(bus::topics::kSessionEnd), [this](const bus::Message& m) {
    auto it = active_.find(m.payload.satellite);
    if (it != active_.end() && it->second == m.payload.session_id) active_.erase(it);
  });
  session_.subscribe(topic(bus::topics::kAudioStream), [this](const bus::Message& m) {
    auto it = active_.find(m.payload.satellite);
    if (it == active_.end() || it->second != m.payload.session_id) {
      ++dropped_;
      return;
    }
    std::vector<datagen::Candidate> candidates;
    const auto list = m.payload.body.find("candidates");
    if (list != m.payload.body.end() && list->is_array()) {
      for (const auto& c : *list) {
        if (!c.is_object() || !c.contains("text") || !c["text"].is_string()) continue;
        const auto score = c.value("acoustic", 0.0);
        candidates.push_back({c["text"].get<std::string>(), score});
      }
    }
    const auto text = candidates.empty() ? std::string() : choose(candidates);
    active_.erase(it);
    session_.publish(topic(bus::topics::kTranscription),
                     bus::Payload{bus::PayloadKind::transcription, m.payload.session_id, m.payload.satellite,
                                  {{"text", text}}});
  });
}

std::string SttService::choose(const std::vector<datagen::Candidate>& candidates) const {
  if (candidates.size() == 1) return candidates.front().text;
  if (lm_) return datagen::rescore_candidates(*lm_, candidates, weights_).front().text;
  return std::max_element(candidates.begin(), candidates.end(),
                          [](const auto& a, const auto& b) { return a.acoustic_score < b.acoustic_score; })
      ->text;
}

std::size_t SttService::poll() { return session_.dispatch(); }
std::size_t SttService::poll(std::chrono::milliseconds wait) { return session_.wait_and_dispatch(wait); }

NluService::NluService(bus::ClientSession session, nlu::NluModel model)
    : session_(std::move(session)), model_(std::move(model)) {
  session_.subscribe(topic(bus::topics::kNluRequest), [this](const bus::Message& m) {
    const auto text = m.payload.body.value("text", std::string());
    const auto result = model_.parse(text);
    session_.publish(topic(bus::topics::kNluResult),
                     bus::Payload{bus::PayloadKind::intent_result, m.payload.session_id, m.payload.satellite,
                                  {{"result", result ? nlu::to_json(*result) : nlohmann::json()}}});
  });
}

std::size_t NluService::poll() { return session_.dispatch(); }
std::size_t NluService::poll(std::chrono::milliseconds wait) { return session_.wait_and_dispatch(wait); }

TtsService::TtsService(bus::ClientSession session) : session_(std::move(session)) {
  session_.subscribe(topic(bus::topics::kTtsSay), [this](const bus::Message& m) {
    const auto text = m.payload.body.value("text", std::string());
    session_.publish(topic(bus::topics::kSatellitePlay),
                     bus::Payload{bus::PayloadKind::say_text, m.payload.session_id, m.payload.satellite,
                                  {{"text", text}}});
    session_.publish(topic(bus::topics::kTtsDone),
                     bus::Payload{bus::PayloadKind::say_text, m.payload.session_id, m.payload.satellite,
                                  nlohmann::json::object()});
  });
}

std::size_t TtsService::poll() { return session_.dispatch(); }
std::size_t TtsService::poll(std::chrono::milliseconds wait) { return session_.wait_and_dispatch(wait); }

}  // namespace corvid::satellite
