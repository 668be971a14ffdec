#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corvid/bus/broker.hpp"
#include "corvid/datagen/ngram.hpp"

namespace corvid::satellite {

struct SatelliteConfig {
  std::string id;
  std::string wake_word = "computer";
  std::string bus_address;
  std::optional<std::string> script;  // path; interactive when absent

  // Lowercases the wake word; throws Error(invalid_argument) for an empty id
  // or wake word.
  void normalize();
};

// Read/write grants a satellite needs and nothing more.
bus::Grants satellite_grants();

// Prefix-anchored, case-insensitive. Returns the rest of the line (leading
// separators stripped, possibly empty) when `line` starts with the wake word
// as a whole word.
std::optional<std::string> detect_wake_word(std::string_view line, std::string_view wake_word);

// Test-mode speech recognizer output: the utterance as the top candidate with
// acoustic score 0, followed by any noise candidates.
std::vector<datagen::Candidate> mock_stt(const std::string& utterance,
                                         const std::vector<datagen::Candidate>& noise = {});

// "<+ms> text" per line, offsets measured from the start of the run and
// non-decreasing. Blank lines and lines starting with '#' are skipped.
struct ScriptLine {
  Millis offset = 0;
  std::string text;

  bool operator==(const ScriptLine&) const = default;
};
// Throws ParseError (kind "syntax") with line numbers.
std::vector<ScriptLine> parse_script(std::string_view text, const std::string& file = "script");

using LineSink = std::function<void(const std::string&)>;

// Text stand-in for the audio streamer and wake word engine of one room.
class Satellite {
 public:
  Satellite(bus::ClientSession session, SatelliteConfig config, Clock clock, LineSink out, LineSink hint = {});

  const SatelliteConfig& config() const { return config_; }
  bus::ClientSession& session() { return session_; }

  // One typed line.
  void on_line(const std::string& line);
  // Extra recognizer candidates sent along with the next utterance.
  void set_candidate_noise(std::vector<datagen::Candidate> noise) { noise_ = std::move(noise); }

  std::size_t poll();
  std::size_t poll(std::chrono::milliseconds wait);

  // True when no wake word is waiting for its utterance to be taken.
  bool idle() const { return !pending_ && !awaiting_line_; }

 private:
  void subscribe();
  void stream(const std::string& session_id, const std::string& utterance);

  bus::ClientSession session_;
  SatelliteConfig config_;
  Clock clock_;
  LineSink out_;
  LineSink hint_;
  std::vector<datagen::Candidate> noise_;

  std::optional<std::string> pending_;       // utterance waiting for activation
  bool awaiting_line_ = false;               // wake word alone; utterance is the next line
  std::optional<std::string> activated_;     // session that asked for audio first
  std::string current_session_;
};

// Replays a script against a satellite as the clock advances.
class ScriptPlayer {
 public:
  ScriptPlayer(std::vector<ScriptLine> lines, Millis start) : lines_(std::move(lines)), start_(start) {}

  // Feeds every line due at `now`; returns how many were fed.
  std::size_t advance(Satellite& sat, Millis now);
  bool finished() const { return next_ == lines_.size(); }
  std::optional<Millis> next_due() const;

 private:
  std::vector<ScriptLine> lines_;
  Millis start_ = 0;
  std::size_t next_ = 0;
};

}  // namespace corvid::satellite
