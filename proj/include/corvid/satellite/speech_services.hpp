#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>

#include "corvid/bus/broker.hpp"
#include "corvid/datagen/ngram.hpp"
#include "corvid/nlu/model.hpp"

namespace corvid::satellite {

// Speech-to-text stand-in. Accepts audio (recognizer candidates) only from a
// satellite the dialog manager activated, picks one candidate, and publishes
// it as the session's transcription. With a language model the candidates are
// rescored; without one the best acoustic score wins.
class SttService {
 public:
  SttService(bus::ClientSession session, std::optional<datagen::NgramModel> lm = std::nullopt,
             datagen::RescoreWeights weights = {});

  std::size_t poll();
  std::size_t poll(std::chrono::milliseconds wait);
  bus::ClientSession& session() { return session_; }

  // Audio that arrived without an activation for its satellite.
  std::uint64_t dropped() const { return dropped_; }

 private:
  std::string choose(const std::vector<datagen::Candidate>& candidates) const;

  bus::ClientSession session_;
  std::optional<datagen::NgramModel> lm_;
  datagen::RescoreWeights weights_;
  std::map<std::string, std::string> active_;  // satellite -> session id
  std::uint64_t dropped_ = 0;
};

// Answers NLU requests with the trained model; a null result means no match.
class NluService {
 public:
  NluService(bus::ClientSession session, nlu::NluModel model);

  std::size_t poll();
  std::size_t poll(std::chrono::milliseconds wait);
  bus::ClientSession& session() { return session_; }
  const nlu::NluModel& model() const { return model_; }

 private:
  bus::ClientSession session_;
  nlu::NluModel model_;
};

// Text-to-speech stand-in: forwards the text to the target satellite and
// reports completion.
class TtsService {
 public:
  explicit TtsService(bus::ClientSession session);

  std::size_t poll();
  std::size_t poll(std::chrono::milliseconds wait);
  bus::ClientSession& session() { return session_; }

 private:
  bus::ClientSession session_;
};

}  // namespace corvid::satellite
