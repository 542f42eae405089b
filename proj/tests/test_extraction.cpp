#include <doctest.h>

#include <nlohmann/json.hpp>
#include <set>

#include "causalkg/extraction.hpp"
#include "causalkg/rng.hpp"
#include "causalkg/text.hpp"
#include "fake_http.hpp"
#include "support.hpp"

using namespace causalkg;

namespace {

bool same_triple(const Triple& t, std::string_view s, std::string_view r, std::string_view o) {
  return t.subject == s && t.relation == r && t.object == o;
}

class ThrowingExtractor final : public Extractor {
 public:
  std::vector<Triple> extract(std::string_view sentence) override {
    if (sentence.find("boom") != std::string_view::npos) throw data_error("Boom", "scripted failure");
    return rule_extract(sentence, RelationLexicon::builtin());
  }
};

}  // namespace

TEST_CASE("rule extraction reproduces the sample causal triples") {
  const auto& lex = RelationLexicon::builtin();
  auto a = rule_extract("Lockdown measures led to isolation", lex);
  REQUIRE(a.size() == 1);
  CHECK(same_triple(a[0], "lockdown measures", "led to", "isolation"));

  auto b = rule_extract("Isolation increased awareness of immediate surroundings", lex);
  REQUIRE(b.size() == 1);
  CHECK(same_triple(b[0], "isolation", "increased", "awareness of immediate surroundings"));

  auto c = rule_extract("The pandemic restricted activities", lex);
  REQUIRE(c.size() == 1);
  CHECK(same_triple(c[0], "the pandemic", "restricted", "activities"));
}

TEST_CASE("an inverted connective swaps subject and object") {
  auto t = rule_extract("people felt isolated due to lockdown measures", RelationLexicon::builtin());
  REQUIRE(t.size() == 1);
  CHECK(same_triple(t[0], "lockdown measures", "caused", "people felt isolated"));
}

TEST_CASE("chained connectives split the sentence between matches") {
  auto t = rule_extract("fear resulted in panic buying which caused empty shelves", RelationLexicon::builtin());
  REQUIRE(t.size() == 2);
  CHECK(same_triple(t[0], "fear", "resulted in", "panic buying which"));
  CHECK(same_triple(t[1], "panic buying which", "caused", "empty shelves"));
}

TEST_CASE("a connective without text on both sides yields nothing") {
  const auto& lex = RelationLexicon::builtin();
  CHECK(rule_extract("caused by nothing", lex).empty());
  CHECK(rule_extract("nothing caused", lex).empty());
  CHECK(rule_extract("a caused led to b", lex).empty());
  CHECK(rule_extract("", lex).empty());
}

TEST_CASE("at most four triples per sentence") {
  auto t = rule_extract("a caused b caused c caused d caused e caused f caused g", RelationLexicon::builtin());
  CHECK(t.size() == kMaxTriplesPerSentence);
}

TEST_CASE("the longest matching phrase wins") {
  const auto lex = RelationLexicon::parse("led\nled to\n");
  auto t = rule_extract("x led to y", lex);
  REQUIRE(t.size() == 1);
  CHECK(same_triple(t[0], "x", "led to", "y"));
  CHECK(lex.patterns().front().phrase == "led to");
}

TEST_CASE("lexicon parsing handles comments and inverted entries") {
  const auto lex = RelationLexicon::parse("# comment\n\n  caused  \nbecause of <= caused\n");
  REQUIRE(lex.patterns().size() == 2);
  CHECK(lex.patterns()[0].phrase == "because of");
  CHECK(lex.patterns()[0].inverted);
  CHECK(lex.patterns()[0].relation == "caused");
  CHECK_FALSE(lex.patterns()[1].inverted);
}

TEST_CASE("extracted subjects and objects are substrings of the normalized sentence") {
  static const char* kWords[] = {"masks", "caused", "led", "to", "people", "due", "home", "increased", "the",
                                 "restricted", "resulted", "in", "fear", "shops"};
  const auto& lex = RelationLexicon::builtin();
  std::set<std::string> labels;
  for (const auto& p : lex.patterns()) labels.insert(p.relation);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    std::vector<std::string> words;
    for (std::uint64_t k = 0, n = 1 + rng.below(14); k < n; ++k) words.push_back(kWords[rng.below(std::size(kWords))]);
    const std::string sentence = text::join(words, " ");
    CAPTURE(sentence);
    for (const auto& t : rule_extract(sentence, lex)) {
      CHECK(sentence.find(t.subject) != std::string::npos);
      CHECK(sentence.find(t.object) != std::string::npos);
      CHECK(labels.count(t.relation) == 1);
      CHECK_FALSE(t.subject.empty());
      CHECK_FALSE(t.object.empty());
    }
  }
}

TEST_CASE("Triple::make normalizes and rejects empty fields") {
  const auto t = Triple::make("  Lockdown   Measures ", "Led To", "ISOLATION", 4, 99);
  CHECK(same_triple(t, "lockdown measures", "led to", "isolation"));
  CHECK(t.source == 4);
  CHECK(t.timestamp == 99);
  CHECK(test::error_code([] { Triple::make(" ", "r", "o"); }) == "InvalidTriple");
}

TEST_CASE("model replies parse with or without a code fence") {
  auto r = parse_extraction_reply("```json\n[{\"s\":\"Covid-19\",\"r\":\"caused\",\"o\":\"Appreciation\"}]\n```");
  REQUIRE(r.triples.size() == 1);
  CHECK(same_triple(r.triples[0], "covid-19", "caused", "appreciation"));

  auto mixed = parse_extraction_reply(R"([{"s":"a","r":"b","o":"c"},{"s":"a"},7,{"s":"","r":"x","o":"y"}])");
  CHECK(mixed.triples.size() == 1);
  CHECK(mixed.dropped == 3);

  CHECK(test::error_code([] { parse_extraction_reply("{\"s\":\"a\"}"); }) == "UnparseableResponse");
  CHECK(test::error_code([] { parse_extraction_reply("sorry, no"); }) == "UnparseableResponse");
}

TEST_CASE("remote extraction sends one deterministic chat request") {
  test::FakeHttp http;
  http.push(200, test::chat_reply(R"([{"s":"Lockdown measures","r":"led to","o":"isolation"}])"));
  RemoteEndpoint ep{"http://llm.local/v1/", "extractor-model", 5.0, 0};
  const auto r = remote_extract("Lockdown measures led to isolation", http, ep);
  REQUIRE(r.triples.size() == 1);
  const auto reqs = http.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].url == "http://llm.local/v1/chat/completions");
  CHECK(reqs[0].timeout_s == 5.0);
  const auto body = nlohmann::json::parse(reqs[0].body);
  CHECK(body["model"] == "extractor-model");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "Lockdown measures led to isolation");
}

TEST_CASE("remote extraction retries bad replies and gives up after max_retries") {
  test::FakeHttp http;
  http.push(200, test::chat_reply("not json"));
  http.push(503, "busy");
  http.push(200, test::chat_reply(R"([{"s":"a","r":"caused","o":"b"}])"));
  RemoteEndpoint ep{"http://llm.local/v1", "m", 1.0, 2};
  CHECK(remote_extract("a caused b", http, ep).triples.size() == 1);
  CHECK(http.requests().size() == 3);

  test::FakeHttp failing;
  failing.push_timeout();
  CHECK(test::error_code([&] { remote_extract("x", failing, ep); }) == "Timeout");
  CHECK(failing.requests().size() == 3);

  test::FakeHttp denied;
  denied.push(401, "no key");
  CHECK(test::error_code([&] { remote_extract("x", denied, ep); }) == "HttpStatus");
  CHECK(denied.requests().size() == 1);
}

TEST_CASE("extract_corpus stamps provenance and is independent of concurrency") {
  std::vector<Tweet> tweets;
  for (TweetId i = 0; i < 60; ++i) {
    tweets.push_back({i * 2, "cause " + std::to_string(i) + " caused effect " + std::to_string(i % 7), 1000 + 10 * static_cast<Timestamp>(i)});
  }
  RuleExtractor ex;
  const auto serial = extract_corpus(tweets, ex, {1, false});
  const auto parallel = extract_corpus(tweets, ex, {4, false});
  REQUIRE(serial.triples.size() == 60);
  CHECK(serial.triples == parallel.triples);
  CHECK(serial.triples[5].source == 10);
  CHECK(serial.triples[5].timestamp == 1050);
}

TEST_CASE("extract_corpus either propagates or skips a failing tweet") {
  const std::vector<Tweet> tweets = {{0, "a caused b", 1}, {1, "boom caused c", 2}, {2, "d led to e", 3}};
  ThrowingExtractor ex;
  CHECK(test::error_code([&] { extract_corpus(tweets, ex, {2, false}); }) == "Boom");
  const auto run = extract_corpus(tweets, ex, {2, true});
  CHECK(run.failed_tweets == 1);
  CHECK(run.triples.size() == 2);
}

TEST_CASE("triples round-trip through jsonl") {
  test::TempDir dir;
  const std::vector<Triple> triples = {Triple::make("a", "caused", "b", 3, 100), Triple::make("c d", "led to", "e", 4, 50)};
  write_triples_jsonl(dir / "t.jsonl", triples);
  CHECK(read_triples_jsonl(dir / "t.jsonl") == triples);
  test::write_file(dir / "bad.jsonl", "{\"s\":\"a\",\"r\":\"\",\"o\":\"b\",\"src\":1,\"ts\":1}\n");
  CHECK(test::error_code([&] { read_triples_jsonl(dir / "bad.jsonl"); }) == "CorruptFile");
}
