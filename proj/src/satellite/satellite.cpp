#include "corvid/satellite/satellite.hpp"

#include <cctype>
#include <charconv>

#include "corvid/common/error.hpp"

namespace corvid::satellite {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '\''; }

bool is_separator(unsigned char c) { return std::isspace(c) || std::ispunct(c); }

bus::TopicName topic(std::string_view t) { return bus::TopicName::parse(t); }

}  // namespace

void SatelliteConfig::normalize() {
  if (trim(id).empty()) throw Error(Errc::invalid_argument, "satellite id must not be empty");
  wake_word = ascii_lower(trim(wake_word));
  if (wake_word.empty()) throw Error(Errc::invalid_argument, "wake word must not be empty");
}

bus::Grants satellite_grants() {
  bus::Grants g;
  g.readable = {topic(bus::topics::kSatellitePlay), topic(bus::topics::kSessionEnd), topic(bus::topics::kSttActivate)};
  g.writable = {topic(bus::topics::kWakeDetected), topic(bus::topics::kAudioStream)};
  return g;
}

std::optional<std::string> detect_wake_word(std::string_view line, std::string_view wake_word) {
  const auto text = trim(line);
  const auto word = trim(wake_word);
  if (word.empty() || text.size() < word.size()) return std::nullopt;
  if (!iequals(text.substr(0, word.size()), word)) return std::nullopt;
  auto rest = text.substr(word.size());
  if (!rest.empty() && is_word_byte(static_cast<unsigned char>(rest.front()))) return std::nullopt;
  while (!rest.empty() && is_separator(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  return std::string(rest);
}

std::vector<datagen::Candidate> mock_stt(const std::string& utterance, const std::vector<datagen::Candidate>& noise) {
  std::vector<datagen::Candidate> out{{utterance, 0.0}};
  out.insert(out.end(), noise.begin(), noise.end());
  return out;
}

std::vector<ScriptLine> parse_script(std::string_view text, const std::string& file) {
  std::vector<ScriptLine> out;
  int line_no = 0;
  Millis last = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fail = [&](const std::string& msg) {
      throw ParseError(file, line_no, 1, msg, "syntax", Errc::parse_error);
    };
    if (line.front() != '+') fail("expected '<+ms> text'");
    Millis offset = 0;
    const auto* begin = line.data() + 1;
    const auto* end = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(begin, end, offset);
    if (ec != std::errc() || ptr == begin || offset < 0) fail("expected a millisecond offset after '+'");
    if (ptr != end && !std::isspace(static_cast<unsigned char>(*ptr))) fail("expected a space after the offset");
    if (offset < last) fail("offsets must not decrease");
    last = offset;
    out.push_back({offset, std::string(trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr))))});
  }
  return out;
}

Satellite::Satellite(bus::ClientSession session, SatelliteConfig config, Clock clock, LineSink out, LineSink hint)
    : session_(std::move(session)),
      config_(std::move(config)),
      clock_(std::move(clock)),
      out_(std::move(out)),
      hint_(std::move(hint)) {
  config_.normalize();
  subscribe();
}

void Satellite::subscribe() {
  session_.subscribe(topic(bus::topics::kSatellitePlay), [this](const bus::Message& m) {
    if (m.payload.satellite != config_.id) return;
    const auto& text = m.payload.body.find("text");
    if (text == m.payload.body.end() || !text->is_string()) return;
    if (out_) out_(config_.id + "> " + text->get<std::string>());
  });
  session_.subscribe(topic(bus::topics::kSessionEnd), [this](const bus::Message& m) {
    if (m.payload.satellite != config_.id) return;
    const bool suppressed = m.payload.body.value("state", "") == "suppressed";
    if (!suppressed && m.payload.session_id != current_session_) return;
    if (suppressed && out_) out_("(another room answered)");
    current_session_.clear();
    pending_.reset();
    awaiting_line_ = false;
    activated_.reset();
  });
  session_.subscribe(topic(bus::topics::kSttActivate), [this](const bus::Message& m) {
    if (m.payload.satellite != config_.id) return;
    current_session_ = m.payload.session_id;
    if (pending_) {
      stream(m.payload.session_id, *pending_);
      pending_.reset();
    } else {
      activated_ = m.payload.session_id;
    }
  });
}

void Satellite::stream(const std::string& session_id, const std::string& utterance) {
  auto candidates = nlohmann::json::array();
  for (const auto& c : mock_stt(utterance, noise_)) candidates.push_back({{"text", c.text}, {"acoustic", c.acoustic_score}});
  noise_.clear();
  session_.publish(topic(bus::topics::kAudioStream),
                   bus::Payload{bus::PayloadKind::audio_chunk, session_id, config_.id, {{"candidates", candidates}}});
}

void Satellite::on_line(const std::string& line) {
  if (awaiting_line_) {
    awaiting_line_ = false;
    if (activated_) {
      stream(*activated_, line);
      activated_.reset();
    } else {
      pending_ = line;
    }
    return;
  }
  auto rest = detect_wake_word(line, config_.wake_word);
  if (!rest) {
    if (hint_ && !trim(line).empty()) hint_("(no wake word; start with '" + config_.wake_word + "')");
    return;
  }
  activated_.reset();
  pending_.reset();
  if (rest->empty()) {
    awaiting_line_ = true;
  } else {
    pending_ = std::move(*rest);
  }
  session_.publish(topic(bus::topics::kWakeDetected),
                   bus::Payload{bus::PayloadKind::wake_detected, "", config_.id, {{"timestamp", clock_()}}});
}

std::size_t Satellite::poll() { return session_.dispatch(); }

std::size_t Satellite::poll(std::chrono::milliseconds wait) { return session_.wait_and_dispatch(wait); }

std::size_t ScriptPlayer::advance(Satellite& sat, Millis now) {
  std::size_t n = 0;
  while (next_ < lines_.size() && start_ + lines_[next_].offset <= now) {
    sat.on_line(lines_[next_++].text);
    ++n;
  }
  return n;
}

std::optional<Millis> ScriptPlayer::next_due() const {
  if (finished()) return std::nullopt;
  return start_ + lines_[next_].offset;
}

}  // namespace corvid::satellite
