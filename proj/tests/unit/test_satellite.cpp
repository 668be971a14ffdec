#include <doctest.h>

#include <random>

#include "corvid/common/error.hpp"
#include "corvid/dsl/bundle.hpp"
#include "corvid/runtime/assistant_host.hpp"
#include "corvid/runtime/demo_skills.hpp"

using namespace corvid;
using namespace corvid::satellite;

namespace {

const std::string kFixtures = CORVID_FIXTURES;

struct Skill {
  dsl::SkillBundle bundle;
  runtime::Models models;
};

const Skill& lights() {
  static const Skill s = [] {
    auto b = dsl::load_bundle(kFixtures + "/smartlights");
    auto m = runtime::train_models({b});
    return Skill{std::move(b), std::move(m)};
  }();
  return s;
}

const Skill& flights() {
  static const Skill s = [] {
    auto b = dsl::load_bundle(kFixtures + "/myskill");
    auto m = runtime::train_models({b});
    return Skill{std::move(b), std::move(m)};
  }();
  return s;
}

std::vector<ScriptLine> script(std::string_view text) { return parse_script(text); }

}  // namespace

TEST_CASE("wake word detection") {
  CHECK(detect_wake_word("computer turn on the light in the lab", "computer") == "turn on the light in the lab");
  CHECK(detect_wake_word("Computer, turn on the light", "computer") == "turn on the light");
  CHECK(detect_wake_word("  COMPUTER!  ", "computer") == "");
  CHECK(detect_wake_word("computer", "computer") == "");
  CHECK_FALSE(detect_wake_word("hello there", "computer"));
  CHECK_FALSE(detect_wake_word("computers are nice", "computer"));
  CHECK_FALSE(detect_wake_word("turn on the computer", "computer"));
  CHECK_FALSE(detect_wake_word("", "computer"));
  CHECK(detect_wake_word("hey jaco what time", "hey jaco") == "what time");
}

TEST_CASE("wake word property: prefix anchored and case-insensitive") {
  std::mt19937_64 rng(3);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz ";
  for (int i = 0; i < 2000; ++i) {
    std::string w, rest;
    for (std::size_t k = 1 + rng() % 8; k > 0; --k) w += letters[rng() % 26];
    for (std::size_t k = rng() % 30; k > 0; --k) rest += letters[rng() % letters.size()];
    rest = std::string(trim(rest));
    std::string shouted = w;
    for (auto& c : shouted) {
      if (rng() % 2) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    CAPTURE(w);
    CAPTURE(rest);
    CHECK(detect_wake_word(shouted + " " + rest, w) == rest);
    if (!ascii_lower(rest).starts_with(w)) CHECK_FALSE(detect_wake_word(rest, w));
  }
}

TEST_CASE("satellite config") {
  SatelliteConfig c{"Alpha", "  Computer ", "", std::nullopt};
  c.normalize();
  CHECK(c.wake_word == "computer");
  SatelliteConfig empty{"Alpha", " ", "", std::nullopt};
  CHECK_THROWS_AS(empty.normalize(), Error);
  SatelliteConfig noid{"", "computer", "", std::nullopt};
  CHECK_THROWS_AS(noid.normalize(), Error);
}

TEST_CASE("script format") {
  const auto s = parse_script("# demo\n+0 computer, turn on the light\n\n+120   computer hello \n+120\n");
  REQUIRE(s.size() == 3);
  CHECK(s[0] == ScriptLine{0, "computer, turn on the light"});
  CHECK(s[1] == ScriptLine{120, "computer hello"});
  CHECK(s[2] == ScriptLine{120, ""});

  auto line_of = [](std::string_view text) {
    try {
      parse_script(text, "x.script");
    } catch (const ParseError& e) {
      CHECK(e.diagnostics().at(0).file == "x.script");
      return e.diagnostics().at(0).line;
    }
    return 0;
  };
  CHECK(line_of("computer hi\n") == 1);
  CHECK(line_of("+0 a\n+x b\n") == 2);
  CHECK(line_of("+0 a\n+10b\n") == 2);
  CHECK(line_of("+50 a\n+10 b\n") == 2);
  CHECK(line_of("+-5 a\n") == 1);
}

TEST_CASE("mock recognizer") {
  const auto one = mock_stt("turn on the light");
  REQUIRE(one.size() == 1);
  CHECK(one[0].text == "turn on the light");
  CHECK(one[0].acoustic_score == 0.0);
  const auto c = mock_stt("a", {{"b", -1.0}});
  REQUIRE(c.size() == 2);
  CHECK(c[1].text == "b");
}

TEST_CASE("two satellites, one session, answer only where the wake word was heard first") {
  runtime::Simulation sim({lights().bundle}, lights().models);
  auto& skill = sim.add_skill(lights().bundle);
  int calls = 0;
  skill.add_topic_callback("turn_on", [&](const sdk::SkillMessage& msg) {
    ++calls;
    CHECK(msg["satellite"] == "Alpha");
    const auto rooms = skill.extract_entities(msg, "smartlights-turn_on");
    REQUIRE(rooms.size() == 1);
    CHECK(rooms[0].value == "lab");
    skill.publish_answer("the light in the lab is on", msg["satellite"].get<std::string>());
  });
  sim.add_satellite("Alpha", script("+0 computer, turn on the light in the lab\n"));
  sim.add_satellite("Beta", script("+40 computer, turn on the light in the lab\n"));
  sim.run();

  CHECK(calls == 1);
  CHECK(sim.output("Alpha") == std::vector<std::string>{"Alpha> the light in the lab is on"});
  CHECK(sim.output("Beta") == std::vector<std::string>{"(another room answered)"});
  const auto& sessions = sim.assistant().dialog().manager().sessions();
  REQUIRE(sessions.size() == 1);
  CHECK(sessions.begin()->second.satellite == "Alpha");
  CHECK(sessions.begin()->second.state == dialog::State::done);
}

TEST_CASE("scripted runs are deterministic") {
  auto run = [] {
    runtime::Simulation sim({lights().bundle}, lights().models);
    demo::register_lights(sim.add_skill(lights().bundle));
    sim.add_satellite("Alpha", script("+0 computer, turn on the light in the lab\n"
                                      "+2000 computer make the kitchen lights red\n"
                                      "+4000 hello there\n"
                                      "+5000 computer\n"
                                      "+5500 dim the lights in the attic\n"));
    sim.add_satellite("Beta", script("+100 computer switch off the lights in the garage\n"
                                     "+2010 computer what is the weather\n"));
    sim.run();
    return std::make_pair(sim.transcript(), sim.log());
  };
  const auto a = run();
  CHECK(a == run());
  CHECK(a.first == std::vector<std::string>{
                       // Beta at +100 falls inside Alpha's arbitration window.
                       "Beta| (another room answered)",
                       "Alpha| Alpha> the light in the lab is on",
                       "Beta| (another room answered)",
                       "Alpha| Alpha> the kitchen light is now red",
                       "Alpha| Alpha> the attic light is dimmer",
                   });
}

TEST_CASE("empty utterance and no match fall back") {
  runtime::Simulation sim({lights().bundle}, lights().models);
  sim.add_satellite("Alpha", script("+0 computer\n+100\n+1000 computer sing me a song\n"));
  sim.run();
  CHECK(sim.output("Alpha") ==
        std::vector<std::string>{"Alpha> I did not understand", "Alpha> Sorry, I can not help with that"});
}

TEST_CASE("lines without the wake word are ignored with a hint") {
  runtime::Simulation sim({lights().bundle}, lights().models);
  auto& sat = sim.add_satellite("Alpha", {});
  std::vector<std::string> hints;
  SatelliteConfig c{"Gamma", "computer", "", std::nullopt};
  auto& gamma = sim.assistant().add_satellite(c, {}, [&](const std::string& h) { hints.push_back(h); });
  gamma.on_line("hello there");
  sat.on_line("turn on the light");
  sim.run();
  CHECK(hints.size() == 1);
  CHECK(sim.assistant().dialog().manager().sessions().empty());
}

TEST_CASE("flight skill answers") {
  runtime::Simulation sim({flights().bundle}, flights().models);
  demo::register_flights(sim.add_skill(flights().bundle));
  sim.add_satellite("Alpha", script("+0 computer book us a flight from new york to berlin\n"));
  sim.run();
  CHECK(sim.output("Alpha") == std::vector<std::string>{"Alpha> ok boss"});

  nlu::Entity munich{"city", "destination", "Munich", "munich", 0, 6};
  CHECK(demo::flights_answer({munich}) == "that wouldn't be wise");
  CHECK(demo::flights_answer({}) == "ok boss");
}

TEST_CASE("no skill running: the session fails after the acting deadline") {
  runtime::Simulation sim({lights().bundle}, lights().models);
  sim.add_satellite("Alpha", script("+0 computer turn on the light in the kitchen\n"));
  sim.run();
  CHECK(sim.output("Alpha") == std::vector<std::string>{"Alpha> Sorry, no skill answered"});
  const auto& s = sim.assistant().dialog().manager().sessions().begin()->second;
  CHECK(s.failure_reason == "no-handler");
  CHECK(s.state == dialog::State::failed);
  CHECK(sim.now() >= 5000);
}

TEST_CASE("recognizer noise is resolved by the language model") {
  runtime::Simulation sim({lights().bundle}, lights().models);
  auto& skill = sim.add_skill(lights().bundle);
  std::vector<std::string> heard;
  skill.add_topic_callback("turn_on", [&](const sdk::SkillMessage& msg) {
    heard.push_back(msg["intent"].get<std::string>());
    skill.publish_answer("ok", msg.satellite);
  });
  auto& alpha = sim.add_satellite("Alpha", script("+0 computer turn on the light in the kitchen\n"));
  // The corrupted variant even has the better acoustic score.
  alpha.set_candidate_noise({{"turn on the night in the kitchen", 0.5}});
  sim.run();
  CHECK(heard == std::vector<std::string>{"smartlights-turn_on"});
  CHECK(sim.output("Alpha") == std::vector<std::string>{"Alpha> ok"});

  // Without a language model the acoustic score decides.
  auto models = lights().models;
  models.lm.reset();
  runtime::Simulation plain({lights().bundle}, models);
  auto& p = plain.add_satellite("Alpha", script("+0 computer turn on the light in the kitchen\n"));
  p.set_candidate_noise({{"zebra", 0.5}});
  plain.run();
  CHECK(plain.output("Alpha") == std::vector<std::string>{"Alpha> Sorry, I can not help with that"});
}

TEST_CASE("speech recognizer ignores audio without an activation") {
  auto broker = bus::Broker::create();
  SttService stt(broker->register_client("stt", bus::Grants::system_grant()));
  auto sat = broker->register_client("sat", satellite_grants());
  sat.publish(bus::TopicName::parse(bus::topics::kAudioStream),
              bus::Payload{bus::PayloadKind::audio_chunk, "session-9", "Alpha",
                           {{"candidates", {{{"text", "hi"}, {"acoustic", 0}}}}}});
  stt.poll();
  CHECK(stt.dropped() == 1);
}
