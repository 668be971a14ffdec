#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corvid/datagen/expand.hpp"
#include "corvid/datagen/ngram.hpp"
#include "corvid/dialog/dialog_service.hpp"
#include "corvid/nlu/model.hpp"
#include "corvid/runtime/sdk.hpp"
#include "corvid/satellite/satellite.hpp"
#include "corvid/satellite/speech_services.hpp"

namespace corvid::runtime {

struct Models {
  std::vector<datagen::TrainingExample> examples;
  nlu::NluModel nlu;
  std::optional<datagen::NgramModel> lm;  // absent when there is nothing to train on
};

inline constexpr int kDefaultLmOrder = 3;

// Expands every bundle and trains both models. No bundles (or no examples)
// gives an empty NLU model that matches nothing.
Models train_models(const std::vector<dsl::SkillBundle>& skills, int lm_order = kDefaultLmOrder,
                    const datagen::ExpandLimits& limits = {});
// <dir>/nlu_examples.jsonl, <dir>/lm.bin, <dir>/nlu.bin
void save_models(const Models& m, const std::string& dir);
// Throws Error(not_found) without nlu.bin; lm.bin is optional.
Models load_models(const std::string& dir);

// The core modules (dialog manager, speech recognizer, NLU, speech output)
// on one broker, all polled from the calling thread.
class LocalAssistant {
 public:
  struct Options {
    dialog::DialogConfig dialog;
    datagen::RescoreWeights weights;
    dialog::LogSink log;
  };

  LocalAssistant(std::shared_ptr<bus::Broker> broker, const std::vector<dsl::SkillBundle>& skills, Models models,
                 Options options, Clock clock);

  // In-process satellite; its id becomes known to the dialog manager.
  satellite::Satellite& add_satellite(satellite::SatelliteConfig config, satellite::LineSink out,
                                      satellite::LineSink hint = {});
  // In-process skill client holding exactly the bundle's grants.
  sdk::Assistant& add_skill(const dsl::SkillBundle& bundle);

  // One round over every component; returns the work done.
  std::size_t poll();
  // Polls until a round does nothing. Throws Error(precondition) when traffic
  // does not settle within `max_rounds`.
  std::size_t settle(std::size_t max_rounds = 10000);

  std::shared_ptr<bus::Broker> broker() { return broker_; }
  dialog::DialogService& dialog() { return *dialog_; }
  satellite::SttService& stt() { return *stt_; }
  satellite::NluService& nlu() { return *nlu_; }
  satellite::Satellite& satellite(const std::string& id) { return *satellites_.at(id); }

 private:
  std::shared_ptr<bus::Broker> broker_;
  Clock clock_;
  std::unique_ptr<dialog::DialogService> dialog_;
  std::unique_ptr<satellite::SttService> stt_;
  std::unique_ptr<satellite::NluService> nlu_;
  std::unique_ptr<satellite::TtsService> tts_;
  std::map<std::string, std::unique_ptr<satellite::Satellite>> satellites_;
  std::vector<std::unique_ptr<sdk::Assistant>> skills_;
};

// LocalAssistant on a simulated clock, driven by satellite scripts. Runs are
// deterministic: same scripts, same transcript.
class Simulation {
 public:
  Simulation(const std::vector<dsl::SkillBundle>& skills, Models models, LocalAssistant::Options options = {});

  Millis now() const { return now_; }
  LocalAssistant& assistant() { return *assistant_; }

  satellite::Satellite& add_satellite(const std::string& id, std::vector<satellite::ScriptLine> script,
                                      const std::string& wake_word = "computer");
  sdk::Assistant& add_skill(const dsl::SkillBundle& bundle) { return assistant_->add_skill(bundle); }

  // Advances time in `step` increments until every script is played and no
  // session is open, or `limit` ms have passed since the start.
  void run(Millis limit = 60000, Millis step = 10);

  // Printed lines of one satellite, and of all satellites as "<id>| line".
  const std::vector<std::string>& output(const std::string& id) const;
  const std::vector<std::string>& transcript() const { return transcript_; }
  const std::vector<std::string>& log() const { return log_; }

 private:
  bool busy() const;

  Millis now_ = 0;
  std::unique_ptr<LocalAssistant> assistant_;
  std::map<std::string, satellite::ScriptPlayer> players_;
  std::map<std::string, std::vector<std::string>> outputs_;
  std::vector<std::string> transcript_;
  std::vector<std::string> log_;
};

}  // namespace corvid::runtime
