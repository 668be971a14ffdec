// Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>
#include <sodium.h>

#include "acceptance/criteria.hpp"
#include "corvid/bus/crypto.hpp"
#include "corvid/common/binary_io.hpp"
#include "corvid/common/error.hpp"
#include "corvid/datagen/expand.hpp"
#include "corvid/dialog/dialog_manager.hpp"
#include "corvid/dsl/bundle.hpp"
#include "corvid/dsl/parse.hpp"
#include "corvid/runtime/assistant_host.hpp"
#include "corvid/runtime/demo_skills.hpp"
#include "corvid/store/warnings.hpp"
#include "support/expand_oracle.hpp"

using namespace corvid;
using acceptance::Outcome;

namespace {

const std::string kFixtures = CORVID_FIXTURES;

// ---- DSL fidelity

Outcome dsl_fidelity() {
  using namespace corvid::dsl;
  const auto dir = kFixtures + "/myskill";
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) bad.push_back(what);
  };

  const auto city = parse_lookup("city", read_file(dir + "/dialog/city.txt"));
  expect(city.entries == std::vector<LookupEntry>{{{"Augsburg"}, "Augsburg"},
                                                   {{"New York", "N Y"}, "New York"},
                                                   {{"Berlin"}, "Berlin"}},
         "city.txt");

  const auto doc = parse_nlu_md("myskill", read_file(dir + "/dialog/nlu.md"));
  const Sequence sentence = {
      {Literal{"Book "}},
      {Alternation{{{{Literal{"me"}}}, {{Literal{"us"}}}}}},
      {Literal{" a flight from "}},
      {SlotRef{"Augsburg", "city", "start"}},
      {Literal{" to "}},
      {SlotRef{"Berlin", "city", "destination"}},
  };
  expect(doc.intents.size() == 1 && doc.intents[0].intent_name == "book_flight" &&
             doc.intents[0].qualified_id() == "myskill-book_flight" &&
             doc.intents[0].sentences == std::vector<Sequence>{sentence},
         "nlu.md intent");
  expect(doc.lookups.size() == 1 && doc.lookups[0].lookup == "city" && doc.lookups[0].file == "city.txt",
         "nlu.md lookup");
  expect(doc.warnings.empty(), "nlu.md warnings");

  const auto manifest = parse_manifest(read_file(dir + "/config.yaml"));
  expect(manifest == SkillManifest{true, "", true, {bus::TopicName::parse("book_flight")},
                                   {bus::TopicName::parse("Jaco/Skills/SayText")}},
         "config.yaml");

  const auto action = parse_action(read_file(dir + "/action/action.yaml"));
  expect(action.command_line == "corvid-skill-flights", "action command");
  const auto bundle = load_bundle(dir);
  expect(bundle.action && bundle.action->entry_topics == std::vector{bus::TopicName::parse("book_flight")},
         "action entry topics");

  const auto rendered = doc.intents.empty() ? std::string{} : render_template(doc.intents[0].sentences.at(0));
  expect(rendered == "Book (me|us) a flight from Augsburg to Berlin", "render_template");

  std::string detail = fmt::format("render=\"{}\"", rendered);
  for (const auto& b : bad) detail += " mismatch:" + b;
  return {bad.empty(), detail};
}

// ---- Expansion oracle

Outcome expansion_oracle() {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  std::uint64_t sentences = 0;
  std::string first;
  for (int i = 0; i < 200; ++i) {
    const auto t = oracle::random_template(rng);
    sentences += t.expected_count;
    std::string why;
    if (!oracle::matches_oracle(t, &why)) {
      if (mismatches++ == 0) first = fmt::format(" first=#{} {}", i, why);
    }
  }
  return {mismatches == 0,
          fmt::format("templates=200 expected_sentences={} mismatches={}{}", sentences, mismatches, first)};
}

// ---- End-to-end interaction

struct Trained {
  dsl::SkillBundle bundle;
  runtime::Models models;
};

const Trained& trained(const std::string& name) {
  static std::map<std::string, Trained> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    auto b = dsl::load_bundle(kFixtures + "/" + name);
    auto m = runtime::train_models({b});
    it = cache.emplace(name, Trained{std::move(b), std::move(m)}).first;
  }
  return it->second;
}

Outcome end_to_end() {
  const auto& lights = trained("smartlights");
  std::vector<std::string> reference;
  int failures = 0;
  std::string first;
  for (int rep = 0; rep < 50; ++rep) {
    runtime::Simulation sim({lights.bundle}, lights.models);
    auto& skill = sim.add_skill(lights.bundle);
    int calls = 0;
    skill.add_topic_callback("turn_on", [&](const sdk::SkillMessage& msg) {
      ++calls;
      const auto rooms = skill.extract_entities(msg, "smartlights-turn_on");
      const auto room = rooms.empty() ? std::string("?") : rooms[0].value;
      skill.publish_answer("the light in the " + room + " is on", msg.satellite);
    });
    sim.add_satellite("Alpha", satellite::parse_script("+0 computer, turn on the light in the lab\n"));
    sim.add_satellite("Beta", satellite::parse_script("+40 computer, turn on the light in the lab\n"));
    sim.run();

    const auto sessions = sim.assistant().dialog().manager().sessions().size();
    const bool ok = sessions == 1 && calls == 1 &&
                    sim.output("Alpha") == std::vector<std::string>{"Alpha> the light in the lab is on"} &&
                    sim.output("Beta") == std::vector<std::string>{"(another room answered)"};
    if (rep == 0) reference = sim.transcript();
    const bool same = sim.transcript() == reference;
    if (!ok || !same) {
      if (failures++ == 0) first = fmt::format(" first_failure=rep{} sessions={} callbacks={} deterministic={}", rep,
                                               sessions, calls, same);
    }
  }
  return {failures == 0, fmt::format("repetitions=50 failed={} alpha=\"Alpha> the light in the lab is on\" "
                                     "beta=\"(another room answered)\"{}",
                                     failures, first)};
}

// ---- Topic confinement

Outcome topic_confinement() {
  const std::vector<std::string> names = {"smartlights", "myskill", "dialogonly"};
  std::vector<dsl::SkillBundle> bundles;
  for (const auto& n : names) bundles.push_back(dsl::load_bundle(kFixtures + "/" + n));
  const auto models = runtime::train_models(bundles);

  runtime::Simulation sim(bundles, models);
  auto broker = sim.assistant().broker();
  std::vector<bus::Envelope> captured;
  broker->add_wiretap([&](const bus::Envelope& e) { captured.push_back(e); });
  auto eve = broker->register_client("eavesdropper", bus::Grants{});

  demo::register_lights(sim.add_skill(bundles[0]));
  auto& flights = sim.add_skill(bundles[1]);
  demo::register_flights(flights);
  sim.add_skill(bundles[2]);

  // Registering a callback outside the manifest must fail at once.
  bool undeclared_rejected = false;
  try {
    flights.add_topic_callback("turn_on", [](const sdk::SkillMessage&) {});
  } catch (const Error& e) {
    undeclared_rejected = e.code() == Errc::permission_denied;
  }

  sim.add_satellite("Alpha", satellite::parse_script("+0 computer turn on the light in the lab\n"
                                                     "+3000 computer book us a flight from augsburg to berlin\n"
                                                     "+6000 computer hello there\n"));
  sim.add_satellite("Beta", satellite::parse_script("+50 computer turn on the light in the lab\n"));
  sim.run();

  std::set<bus::TopicName> topics;
  for (const auto& e : captured) topics.insert(e.topic);

  // Everything the eavesdropper can get: its own key material, a key request
  // and a subscription on every observed topic, and forged keys.
  std::vector<bus::TopicKey> keys = eve.key_material();
  int granted_requests = 0;
  for (const auto& t : topics) {
    try {
      keys.push_back(eve.request_key(t));
      ++granted_requests;
    } catch (const Error&) {
    }
    try {
      eve.subscribe(t, [](const bus::Message&) {});
    } catch (const Error&) {
    }
  }
  std::mt19937_64 rng(99);
  std::size_t attempts = 0, opened = 0;
  for (const auto& env : captured) {
    auto tries = keys;
    bus::TopicKey forged{env.topic, {}, env.key_id};
    for (auto& b : forged.key_bytes) b = static_cast<unsigned char>(rng());
    tries.push_back(forged);
    tries.push_back(bus::TopicKey{env.topic, {}, env.key_id});
    for (const auto& k : tries) {
      ++attempts;
      try {
        bus::open(k, env);
        ++opened;
      } catch (const Error&) {
      }
    }
  }

  std::vector<std::string> missing;
  for (const auto* t : {"turn_on", "book_flight", "Jaco/Skills/SayText"}) {
    if (!topics.contains(bus::TopicName::parse(t))) missing.push_back(t);
  }
  const bool pass = !captured.empty() && attempts > 0 && opened == 0 && granted_requests == 0 && missing.empty() &&
                    undeclared_rejected;
  std::string detail = fmt::format(
      "skills=3 envelopes={} topics={} open_attempts={} opened={} key_requests_granted={} "
      "undeclared_callback_rejected={}",
      captured.size(), topics.size(), attempts, opened, granted_requests, undeclared_rejected);
  for (const auto& m : missing) detail += " missing_topic:" + m;
  return {pass, detail};
}

// ---- Dialog liveness

int rank(dialog::State s) {
  using dialog::State;
  switch (s) {
    case State::listening: return 0;
    case State::transcribing: return 1;
    case State::understanding: return 2;
    case State::acting: return 3;
    case State::responding: return 4;
    default: return 5;
  }
}

nlu::IntentResult book_flight() {
  nlu::IntentResult r;
  r.intent_id = "myskill-book_flight";
  r.confidence = 1.0;
  r.entities.push_back({"city", "start", "Augsburg", "augsburg", 22, 30});
  r.entities.push_back({"city", "destination", "Berlin", "berlin", 34, 40});
  return r;
}

struct LivenessStats {
  std::size_t sessions = 0;
  std::size_t events = 0;
  std::size_t order_violations = 0;
  std::size_t concurrent_violations = 0;
  std::size_t unterminated = 0;
  std::size_t late = 0;
};

// Random interleavings over three satellites plus an unknown one, on a
// simulated clock that ticks every 100 ms between events.
void run_sequence(std::uint64_t seed, LivenessStats& stats) {
  using dialog::State;
  std::mt19937_64 rng(seed);
  Millis now = 0;
  std::size_t subscribers = rng() % 2;
  dialog::DialogConfig config;
  config.satellites = {"Alpha", "Beta", "Gamma"};
  dialog::DialogManager m(config, [&] { return now; }, [&](const bus::TopicName&) { return subscribers; });
  const std::vector<std::string> sats{"Alpha", "Beta", "Gamma", "Nobody"};
  std::map<std::string, State> last;
  std::map<std::string, Millis> terminal_at;
  const int events = 1 + static_cast<int>(rng() % 20);
  stats.events += static_cast<std::size_t>(events);

  auto at = [&](Millis t) {
    now = t;
    m.tick(now);
  };
  auto any_session = [&]() -> std::string {
    if (m.sessions().empty() || rng() % 8 == 0) return "session-404";
    auto it = m.sessions().begin();
    std::advance(it, static_cast<long>(rng() % m.sessions().size()));
    return it->first;
  };
  auto observe = [&] {
    for (const auto& t : m.take_transitions()) {
      const bool forward = t.from == t.to ? (t.to == State::listening && !last.contains(t.session_id))
                                          : (rank(t.to) > rank(t.from) && last.contains(t.session_id) &&
                                             last.at(t.session_id) == t.from);
      if (!forward) ++stats.order_violations;
      last[t.session_id] = t.to;
      if (dialog::is_terminal(t.to)) terminal_at[t.session_id] = t.at;
    }
    m.take_outbox();
    std::map<std::string, int> open;
    for (const auto& [id, s] : m.sessions()) {
      if (!dialog::is_terminal(s.state) && ++open[s.satellite] > 1) ++stats.concurrent_violations;
    }
  };

  constexpr Millis kTick = 100;
  for (int e = 0; e < events; ++e) {
    const auto until = now + static_cast<Millis>(rng() % 4000);
    while (now + kTick <= until) {
      at(now + kTick);
      observe();
    }
    now = until;
    std::vector<dialog::DialogSession> open;
    for (const auto& [id, s] : m.sessions()) {
      if (!dialog::is_terminal(s.state)) open.push_back(s);
    }
    if (!open.empty() && rng() % 2) {
      const auto& s = open[rng() % open.size()];
      switch (s.state) {
        case State::transcribing: m.on_transcription(s.session_id, "turn on the light"); break;
        case State::understanding: m.on_intent(s.session_id, book_flight()); break;
        case State::acting: m.on_skill_answer(s.session_id, "ok boss", s.satellite); break;
        case State::responding: m.on_tts_done(s.session_id); break;
        default: break;
      }
      observe();
      continue;
    }
    switch (rng() % 7) {
      case 0:
      case 1: m.on_wake_detected(sats[rng() % sats.size()], now - static_cast<Millis>(rng() % 200)); break;
      case 2: m.on_transcription(any_session(), rng() % 4 ? "turn on the light" : ""); break;
      case 3: m.on_intent(any_session(), rng() % 4 ? std::optional(book_flight()) : std::nullopt); break;
      case 4: m.on_skill_answer(any_session(), "ok boss", sats[rng() % 3]); break;
      case 5: m.on_tts_done(any_session()); break;
      case 6: m.tick(now); break;
    }
    observe();
  }

  const auto quiet_from = now;
  const auto budget = m.config().window_ms + m.config().deadlines.sum();
  for (Millis t = quiet_from; t <= quiet_from + 2 * budget; t += kTick) {
    at(t);
    observe();
  }
  for (const auto& [id, s] : m.sessions()) {
    ++stats.sessions;
    if (!dialog::is_terminal(s.state) || !terminal_at.contains(id)) {
      ++stats.unterminated;
    } else if (terminal_at.at(id) - s.started_at > m.config().deadlines.sum() + kTick) {
      ++stats.late;
    }
  }
}

Outcome dialog_liveness() {
  LivenessStats st;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) run_sequence(seed, st);
  const bool pass = st.order_violations == 0 && st.concurrent_violations == 0 && st.unterminated == 0 && st.late == 0;
  return {pass, fmt::format("sequences=1000 events={} sessions={} concurrent_violations={} order_violations={} "
                            "unterminated={} past_deadline_sum={}",
                            st.events, st.sessions, st.concurrent_violations, st.order_violations, st.unterminated,
                            st.late)};
}

// ---- Store warning derivation

Outcome store_warnings() {
  // The manifest rebuilt with its keys and list items in a new order per run.
  const std::vector<std::string> keys = {"  has_action: true\n", "  extra_container_flags: \"\"\n",
                                         "  needs_internet_access: true\n",
                                         "  topics_read:\n    - \"book_flight\"\n",
                                         "  topics_write:\n    - \"Jaco/Skills/SayText\"\n"};
  std::mt19937_64 rng(7);
  const auto reference = dsl::parse_manifest(read_file(kFixtures + "/myskill/config.yaml"));
  const auto expected = std::set{store::WarningKind::internet_access, store::WarningKind::writes_system_topic};
  std::vector<nlohmann::json> runs;
  std::set<store::WarningKind> kinds;
  bool all_match = true;
  for (int run = 0; run < 3; ++run) {
    auto order = keys;
    std::shuffle(order.begin(), order.end(), rng);
    std::string yaml = "system:\n";
    for (const auto& k : order) yaml += k;
    const auto manifest = dsl::parse_manifest(yaml);
    if (!(manifest == reference)) all_match = false;
    const auto warnings = store::lint_warnings(manifest);
    std::set<store::WarningKind> got;
    auto j = nlohmann::json::array();
    for (const auto& w : warnings) {
      got.insert(w.kind);
      j.push_back(store::to_json(w));
    }
    if (got != expected) all_match = false;
    kinds = got;
    runs.push_back(j);
  }
  const bool stable = runs[0] == runs[1] && runs[1] == runs[2];
  std::string names;
  for (const auto& w : runs[0]) names += (names.empty() ? "" : ",") + w.at("kind").get<std::string>();
  return {all_match && stable, fmt::format("runs=3 warnings={{{}}} identical_across_runs={}", names, stable)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
  double limit_s;  // 0 when the criterion has no runtime bound
};

}  // namespace

int main() {
  if (sodium_init() < 0) return 2;
  const std::vector<Criterion> criteria = {
      {"dsl-fidelity", dsl_fidelity, 1},
      {"expansion-oracle", expansion_oracle, 10},
      {"end-to-end-interaction", end_to_end, 0},
      {"topic-confinement", topic_confinement, 0},
      {"nlu-benchmark", acceptance::nlu_benchmark, 60},
      {"lm-rescoring", acceptance::lm_rescoring, 30},
      {"dialog-liveness", dialog_liveness, 0},
      {"store-warnings", store_warnings, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt::format("{:.2f}s", secs);
    if (c.limit_s > 0) {
      timing += fmt::format(" (<{:.0f}s)", c.limit_s);
      if (secs >= c.limit_s) {
        o.pass = false;
        timing += " over time limit";
      }
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s [%s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
