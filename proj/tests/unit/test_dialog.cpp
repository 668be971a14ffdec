#include <doctest.h>

#include <algorithm>
#include <random>

#include "corvid/common/error.hpp"
#include "corvid/dialog/dialog_service.hpp"

using namespace corvid;
using namespace corvid::dialog;

namespace {

struct Harness {
  Millis now = 0;
  std::size_t subscribers = 1;
  DialogManager m;

  explicit Harness(DialogConfig c = base_config())
      : m(std::move(c), [this] { return now; }, [this](const bus::TopicName&) { return subscribers; }) {}

  static DialogConfig base_config() {
    DialogConfig c;
    c.satellites = {"Alpha", "Beta", "Gamma"};
    return c;
  }

  void at(Millis t) {
    now = t;
    m.tick(now);
  }

  // Runs Alpha through arbitration and returns its session id.
  std::string start(const std::string& sat = "Alpha", Millis t = 0) {
    now = t;
    m.on_wake_detected(sat, t);
    at(t + m.config().window_ms);
    auto s = m.active_session(sat);
    REQUIRE(s);
    return s->session_id;
  }

  std::vector<Outbound> outbox_on(std::string_view topic) {
    std::vector<Outbound> out;
    for (auto& o : m.take_outbox()) {
      if (o.topic.str() == topic) out.push_back(std::move(o));
    }
    return out;
  }
};

nlu::IntentResult book_flight() {
  nlu::IntentResult r;
  r.intent_id = "myskill-book_flight";
  r.confidence = 1.0;
  r.entities.push_back({"city", "start", "Augsburg", "augsburg", 22, 30});
  r.entities.push_back({"city", "destination", "Berlin", "berlin", 34, 40});
  return r;
}

State state_of(const DialogManager& m, const std::string& id) { return m.sessions().at(id).state; }

}  // namespace

TEST_CASE("earliest detection wins the window") {
  Harness h;
  h.now = 0;
  CHECK_FALSE(h.m.on_wake_detected("Alpha", 0));
  h.now = 120;
  CHECK_FALSE(h.m.on_wake_detected("Beta", 120));
  h.at(299);
  CHECK(h.m.take_decisions().empty());
  h.at(300);
  const auto d = h.m.take_decisions();
  REQUIRE(d.size() == 2);
  CHECK(std::get<Suppressed>(d[0]).satellite == "Beta");
  CHECK(std::get<Suppressed>(d[0]).reason == "arbitration");
  CHECK(std::get<Started>(d[1]).session.satellite == "Alpha");
  CHECK(h.m.active_session("Alpha")->state == State::transcribing);
  CHECK_FALSE(h.m.active_session("Beta"));

  const auto out = h.m.take_outbox();
  REQUIRE(out.size() == 2);
  CHECK(out[0].topic.str() == "Jaco/Dialog/SessionEnd");
  CHECK(out[0].payload.satellite == "Beta");
  CHECK(out[0].payload.body["state"] == "suppressed");
  CHECK(out[1].topic.str() == "Jaco/Stt/Activate");
  CHECK(out[1].payload.satellite == "Alpha");
  CHECK(out[1].payload.body["stream"] == "Jaco/Audio/Stream");
}

TEST_CASE("single detection and tie rule") {
  Harness h;
  h.start("Gamma", 10);
  CHECK(h.m.active_session("Gamma"));

  Harness tie;
  tie.now = 5;
  tie.m.on_wake_detected("Beta", 5);
  tie.m.on_wake_detected("Alpha", 5);
  tie.at(305);
  CHECK(tie.m.active_session("Alpha"));
  CHECK_FALSE(tie.m.active_session("Beta"));
}

TEST_CASE("detection timestamps decide, not arrival order") {
  Harness h;
  h.now = 0;
  h.m.on_wake_detected("Beta", 40);
  h.now = 30;
  h.m.on_wake_detected("Alpha", 10);
  h.at(300);
  CHECK(h.m.active_session("Alpha"));
}

TEST_CASE("unknown satellite is suppressed at once") {
  Harness h;
  const auto d = h.m.on_wake_detected("Kitchen", 0);
  REQUIRE(d);
  CHECK(std::get<Suppressed>(*d).reason == "unknown-satellite");
  h.at(1000);
  CHECK(h.m.sessions().empty());
}

TEST_CASE("full interaction") {
  Harness h;
  const auto id = h.start();
  h.m.take_outbox();

  h.now = 1000;
  h.m.on_transcription(id, "book me a flight from augsburg to berlin");
  CHECK(state_of(h.m, id) == State::understanding);
  auto nlu = h.outbox_on("Jaco/Nlu/Request");
  REQUIRE(nlu.size() == 1);
  CHECK(nlu[0].payload.body["text"] == "book me a flight from augsburg to berlin");
  CHECK(nlu[0].payload.session_id == id);

  h.now = 1100;
  h.m.on_intent(id, book_flight());
  CHECK(state_of(h.m, id) == State::acting);
  auto skill = h.outbox_on("book_flight");
  REQUIRE(skill.size() == 1);
  CHECK(skill[0].payload.body["satellite"] == "Alpha");
  CHECK(skill[0].payload.body["session"] == id);
  CHECK(skill[0].payload.body["entities"].size() == 2);

  h.now = 1200;
  h.m.on_skill_answer(id, "ok boss", "Alpha");
  CHECK(state_of(h.m, id) == State::responding);
  auto say = h.outbox_on("Jaco/Tts/Say");
  REQUIRE(say.size() == 1);
  CHECK(say[0].payload.body["text"] == "ok boss");
  CHECK(say[0].payload.satellite == "Alpha");

  // A second answer is dropped.
  const auto dropped = h.m.dropped();
  h.m.on_skill_answer(id, "again", "Alpha");
  CHECK(h.m.dropped() == dropped + 1);
  CHECK(h.outbox_on("Jaco/Tts/Say").empty());

  h.now = 1300;
  h.m.on_tts_done(id);
  CHECK(state_of(h.m, id) == State::done);
  CHECK_FALSE(h.m.active_session("Alpha"));
  auto end = h.outbox_on("Jaco/Dialog/SessionEnd");
  REQUIRE(end.size() == 1);
  CHECK(end[0].payload.body["state"] == "done");

  std::vector<std::string> lines;
  for (const auto& t : h.m.take_transitions()) lines.push_back(t.format());
  REQUIRE(lines.size() == 6);
  CHECK(lines[1] == "dialog t=300 session=" + id + " satellite=Alpha from=listening to=transcribing");
  CHECK(lines[3] == "dialog t=1100 session=" + id +
                        " satellite=Alpha from=understanding to=acting reason=myskill-book_flight");
  CHECK(lines[5] == "dialog t=1300 session=" + id + " satellite=Alpha from=responding to=done");

  // Late events for a finished session are dropped.
  h.m.on_transcription(id, "hello");
  CHECK(state_of(h.m, id) == State::done);
  CHECK(h.m.take_outbox().empty());
}

TEST_CASE("answers are routed to the session's satellite") {
  Harness h;
  const auto id = h.start("Beta");
  h.m.on_transcription(id, "x");
  h.m.on_intent(id, book_flight());
  h.m.take_outbox();
  h.m.on_skill_answer(id, "that wouldn't be wise", "Alpha");
  auto say = h.outbox_on("Jaco/Tts/Say");
  REQUIRE(say.size() == 1);
  CHECK(say[0].payload.satellite == "Beta");
  CHECK(say[0].payload.body["text"] == "that wouldn't be wise");
}

TEST_CASE("empty transcription and no match fall back") {
  DialogConfig c = Harness::base_config();
  c.fallbacks["en"].empty_transcription = "Pardon?";
  Harness h(c);
  const auto id = h.start();
  h.m.take_outbox();
  h.m.on_transcription(id, "  ");
  CHECK(state_of(h.m, id) == State::failed);
  CHECK(h.m.sessions().at(id).failure_reason == "empty-transcription");
  auto say = h.outbox_on("Jaco/Tts/Say");
  REQUIRE(say.size() == 1);
  CHECK(say[0].payload.body["text"] == "Pardon?");
  CHECK_FALSE(h.m.active_session("Alpha"));

  Harness d;
  const auto id2 = d.start();
  d.m.on_transcription(id2, "");
  CHECK(d.outbox_on("Jaco/Tts/Say")[0].payload.body["text"] == "I did not understand");

  Harness n;
  const auto id3 = n.start();
  n.m.on_transcription(id3, "sing a song");
  n.m.on_intent(id3, std::nullopt);
  CHECK(n.m.sessions().at(id3).failure_reason == "no-match");
  CHECK(n.outbox_on("Jaco/Tts/Say").size() == 1);
  // The fallback's own tts-done is not an error.
  const auto dropped = n.m.dropped();
  n.m.on_tts_done(id3);
  CHECK(n.m.dropped() == dropped);
}

TEST_CASE("acting expiry distinguishes missing handler from slow handler") {
  for (std::size_t subs : {0, 1}) {
    Harness h;
    h.subscribers = subs;
    const auto id = h.start();
    h.now = 1000;
    h.m.on_transcription(id, "x");
    h.m.on_intent(id, book_flight());
    h.at(5999);
    CHECK(state_of(h.m, id) == State::acting);
    h.at(6000);
    CHECK(state_of(h.m, id) == State::failed);
    CHECK(h.m.sessions().at(id).failure_reason == (subs == 0 ? "no-handler" : "timeout"));
  }
}

TEST_CASE("deadlines per state") {
  Harness h;
  auto id = h.start();  // transcribing from t=300
  CHECK(h.m.tick(10299).empty());
  const auto expired = h.m.tick(10300);
  REQUIRE(expired.size() == 1);
  CHECK(expired[0].session_id == id);
  CHECK(expired[0].failure_reason == "timeout");

  // Expiry releases the satellite.
  id = h.start("Alpha", 20000);
  CHECK(h.m.active_session("Alpha")->session_id == id);
  h.now = 20400;
  h.m.on_transcription(id, "x");
  h.at(25399);
  CHECK(state_of(h.m, id) == State::understanding);
  h.at(25400);
  CHECK(state_of(h.m, id) == State::failed);

  const auto fresh = h.start("Beta", 30000);
  CHECK(h.m.tick(30400).empty());
  CHECK(state_of(h.m, fresh) == State::transcribing);
}

TEST_CASE("wake word from a busy satellite waits for its session") {
  Harness h;
  const auto id = h.start();
  h.now = 500;
  h.m.on_wake_detected("Alpha", 500);
  h.at(2000);
  CHECK(h.m.active_session("Alpha")->session_id == id);
  h.now = 2500;
  h.m.on_transcription(id, "");
  // The queued detection opens a window when the session ends.
  CHECK_FALSE(h.m.active_session("Alpha"));
  h.at(2800);
  const auto next = h.m.active_session("Alpha");
  REQUIRE(next);
  CHECK(next->session_id != id);
}

TEST_CASE("different satellites may hold sessions at the same time") {
  Harness h;
  const auto a = h.start("Alpha", 0);
  const auto b = h.start("Beta", 1000);
  CHECK(a != b);
  CHECK(h.m.active_session("Alpha")->session_id == a);
  CHECK(h.m.active_session("Beta")->session_id == b);
}

TEST_CASE("intent topics") {
  Harness h;
  CHECK(h.m.intent_topic("myskill-book_flight") == "book_flight");
  h.m.set_intent_topic("smart-lights-turn_on", "turn_on");
  CHECK(h.m.intent_topic("smart-lights-turn_on") == "turn_on");
}

TEST_CASE("config file") {
  const auto c = DialogConfig::parse(
      "window_ms: 250\n"
      "deadlines_ms: {acting: 2000}\n"
      "language: de\n"
      "fallbacks:\n"
      "  de: {empty_transcription: \"Wie bitte?\"}\n"
      "satellites: [Alpha, Beta]\n");
  CHECK(c.window_ms == 250);
  CHECK(c.deadlines.acting == 2000);
  CHECK(c.deadlines.transcribing == 10000);
  CHECK(c.phrases().empty_transcription == "Wie bitte?");
  CHECK(c.phrases().no_match == Phrases{}.no_match);
  CHECK(c.satellites == std::vector<std::string>{"Alpha", "Beta"});
  CHECK(DialogConfig::parse("") == DialogConfig{});

  auto kind_of = [](const std::string& yaml) -> std::string {
    try {
      DialogConfig::parse(yaml);
    } catch (const ParseError& e) {
      CHECK(e.code() == Errc::malformed_config);
      return e.diagnostics().at(0).kind + "@" + std::to_string(e.diagnostics().at(0).line);
    }
    return "ok";
  };
  CHECK(kind_of("window_ms: -3\n") == "wrong-type@1");
  CHECK(kind_of("window_ms: 300\nwindow: 2\n") == "unknown-key@2");
  CHECK(kind_of("deadlines_ms:\n  talking: 3\n") == "unknown-key@2");
  CHECK(kind_of("satellites: Alpha\n") == "wrong-type@1");
  CHECK(kind_of("window_ms: [\n") == "syntax@2");
  CHECK_THROWS_AS(DialogConfig::load("/nonexistent/dialog.yaml"), Error);
}

namespace {

int rank(State s) {
  switch (s) {
    case State::listening: return 0;
    case State::transcribing: return 1;
    case State::understanding: return 2;
    case State::acting: return 3;
    case State::responding: return 4;
    default: return 5;
  }
}

struct Trace {
  std::vector<std::string> lines;
  std::map<std::string, Millis> terminal_at;
  std::set<std::string> outcomes;  // "done" or the failure reason
};

// Random event interleavings over three satellites plus a stranger.
Trace run_sequence(std::uint64_t seed, bool check) {
  std::mt19937_64 rng(seed);
  Harness h;
  h.subscribers = rng() % 2;
  const std::vector<std::string> sats{"Alpha", "Beta", "Gamma", "Nobody"};
  Trace trace;
  std::map<std::string, State> last;
  const int events = 1 + static_cast<int>(rng() % 20);

  auto any_session = [&]() -> std::string {
    if (h.m.sessions().empty() || rng() % 8 == 0) return "session-404";
    auto it = h.m.sessions().begin();
    std::advance(it, static_cast<long>(rng() % h.m.sessions().size()));
    return it->first;
  };

  auto observe = [&] {
    for (const auto& t : h.m.take_transitions()) {
      trace.lines.push_back(t.format());
      if (!check) continue;
      // Order: forward only, never revisiting a state.
      if (t.from == t.to) {
        CHECK(t.to == State::listening);
        CHECK_FALSE(last.contains(t.session_id));
      } else {
        CHECK(rank(t.to) > rank(t.from));
        CHECK(last.at(t.session_id) == t.from);
      }
      last[t.session_id] = t.to;
      if (is_terminal(t.to)) trace.terminal_at[t.session_id] = t.at;
    }
    h.m.take_outbox();
    if (!check) return;
    std::map<std::string, int> open;
    for (const auto& [id, s] : h.m.sessions()) {
      if (!is_terminal(s.state)) ++open[s.satellite];
    }
    for (const auto& [sat, n] : open) CHECK(n <= 1);
  };

  // The service ticks between events; model that with a 100 ms tick.
  constexpr Millis kTick = 100;
  for (int e = 0; e < events; ++e) {
    const auto until = h.now + static_cast<Millis>(rng() % 4000);
    while (h.now + kTick <= until) {
      h.at(h.now + kTick);
      observe();
    }
    h.now = until;
    // Half of the events push an open session one step along its happy path.
    std::vector<DialogSession> open;
    for (const auto& [id, s] : h.m.sessions()) {
      if (!is_terminal(s.state)) open.push_back(s);
    }
    if (!open.empty() && rng() % 2) {
      const auto& s = open[rng() % open.size()];
      switch (s.state) {
        case State::transcribing: h.m.on_transcription(s.session_id, "turn on the light"); break;
        case State::understanding: h.m.on_intent(s.session_id, book_flight()); break;
        case State::acting: h.m.on_skill_answer(s.session_id, "ok boss", s.satellite); break;
        case State::responding: h.m.on_tts_done(s.session_id); break;
        default: break;
      }
      observe();
      continue;
    }
    switch (rng() % 7) {
      case 0:
      case 1: h.m.on_wake_detected(sats[rng() % sats.size()], h.now - static_cast<Millis>(rng() % 200)); break;
      case 2: h.m.on_transcription(any_session(), rng() % 4 ? "turn on the light" : ""); break;
      case 3: h.m.on_intent(any_session(), rng() % 4 ? std::optional(book_flight()) : std::nullopt); break;
      case 4: h.m.on_skill_answer(any_session(), "ok boss", sats[rng() % 3]); break;
      case 5: h.m.on_tts_done(any_session()); break;
      case 6: h.m.tick(h.now); break;
    }
    observe();
  }

  // Let time run out with ticks only; everything must settle.
  const auto quiet_from = h.now;
  const auto budget = h.m.config().window_ms + h.m.config().deadlines.sum();
  for (Millis t = quiet_from; t <= quiet_from + 2 * budget; t += kTick) {
    h.at(t);
    observe();
  }
  if (check) {
    for (const auto& [id, s] : h.m.sessions()) {
      CAPTURE(id);
      REQUIRE(is_terminal(s.state));
      trace.outcomes.insert(s.state == State::done ? "done" : s.failure_reason);
      CHECK(trace.terminal_at.at(id) - s.started_at <= h.m.config().deadlines.sum() + kTick);
    }
    CHECK(h.m.next_deadline() == std::nullopt);
  }
  return trace;
}

}  // namespace

TEST_CASE("liveness and single session per satellite over random interleavings") {
  std::set<std::string> outcomes;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    CAPTURE(seed);
    outcomes.merge(run_sequence(seed, true).outcomes);
  }
  // The generator reaches every way a session can end.
  CHECK(outcomes == std::set<std::string>{"done", "empty-transcription", "no-handler", "no-match", "timeout"});
}

TEST_CASE("runs are a pure function of the event sequence") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(run_sequence(seed, false).lines == run_sequence(seed, false).lines);
  }
  // Arrival order of the detections inside one window does not matter.
  std::vector<std::pair<std::string, Millis>> dets{{"Alpha", 30}, {"Beta", 30}, {"Gamma", 10}};
  std::set<std::string> winners;
  std::sort(dets.begin(), dets.end());
  do {
    Harness h;
    for (const auto& [sat, t] : dets) h.m.on_wake_detected(sat, t);
    h.at(300);
    for (const auto& s : {"Alpha", "Beta", "Gamma"}) {
      if (h.m.active_session(s)) winners.insert(s);
    }
  } while (std::next_permutation(dets.begin(), dets.end()));
  CHECK(winners == std::set<std::string>{"Gamma"});
}

TEST_CASE("service over the bus") {
  auto broker = bus::Broker::create();
  Millis now = 0;
  Clock clock = [&] { return now; };
  std::vector<std::string> log;
  DialogConfig c;
  c.satellites = {"Alpha", "Beta"};
  DialogService svc(broker->register_client("dialog", bus::Grants::system_grant(), clock), c, clock,
                    [&](const std::string& l) { log.push_back(l); });

  auto peer = broker->register_client("peer", bus::Grants::system_grant(), clock);
  std::vector<bus::Message> seen;
  auto record = [&](const bus::Message& m) { seen.push_back(m); };
  for (auto t : {bus::topics::kSttActivate, bus::topics::kNluRequest, bus::topics::kTtsSay, bus::topics::kSessionEnd}) {
    peer.subscribe(bus::TopicName::parse(t), record);
  }
  auto skill = broker->register_client("skill", bus::Grants{{bus::TopicName::parse("book_flight")}, {}, false}, clock);
  int skill_calls = 0;
  skill.subscribe(bus::TopicName::parse("book_flight"), [&](const bus::Message& m) {
    ++skill_calls;
    CHECK(m.payload.body["satellite"] == "Alpha");
  });

  auto send = [&](std::string_view topic, bus::PayloadKind kind, const std::string& session,
                  const std::string& sat, nlohmann::json body) {
    peer.publish(bus::TopicName::parse(topic), bus::Payload{kind, session, sat, std::move(body)});
    svc.poll();
  };
  auto last = [&](std::string_view topic) -> bus::Message {
    peer.dispatch();
    for (auto it = seen.rbegin(); it != seen.rend(); ++it) {
      if (it->topic.str() == topic) return *it;
    }
    FAIL("nothing on " << topic);
    return {bus::TopicName::parse("_"), {}, 0, {}};
  };

  send(bus::topics::kWakeDetected, bus::PayloadKind::wake_detected, "", "Alpha", {{"timestamp", 0}});
  now = 100;
  send(bus::topics::kWakeDetected, bus::PayloadKind::wake_detected, "", "Beta", {{"timestamp", 100}});
  now = 300;
  svc.poll();
  const auto activate = last(bus::topics::kSttActivate);
  CHECK(activate.payload.satellite == "Alpha");
  const auto id = activate.payload.session_id;
  CHECK(last(bus::topics::kSessionEnd).payload.satellite == "Beta");

  send(bus::topics::kTranscription, bus::PayloadKind::transcription, id, "Alpha", {{"text", "book a flight"}});
  CHECK(last(bus::topics::kNluRequest).payload.body["text"] == "book a flight");
  send(bus::topics::kNluResult, bus::PayloadKind::intent_result, id, "Alpha", {{"result", nlu::to_json(book_flight())}});
  skill.dispatch();
  CHECK(skill_calls == 1);
  send(bus::topics::kSayText, bus::PayloadKind::skill_answer, id, "Alpha", {{"text", "ok boss"}});
  CHECK(last(bus::topics::kTtsSay).payload.body["text"] == "ok boss");
  send(bus::topics::kTtsDone, bus::PayloadKind::say_text, id, "Alpha", nlohmann::json::object());
  CHECK(svc.manager().sessions().at(id).state == State::done);
  CHECK(last(bus::topics::kSessionEnd).payload.body["state"] == "done");
  CHECK(log.size() == 6);

  send(bus::topics::kTranscription, bus::PayloadKind::transcription, id, "Alpha", {{"missing", 1}});
  CHECK(svc.malformed() == 1);
}
