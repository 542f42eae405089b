#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "causalkg/encode.hpp"
#include "causalkg/rng.hpp"
#include "fake_http.hpp"
#include "support.hpp"

using namespace causalkg;

namespace {

double norm(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string random_words(Rng& rng, std::string_view prefix, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += std::string(prefix) + std::to_string(rng.below(100000));
  }
  return out;
}

}  // namespace

TEST_CASE("local encoder output is unit length, deterministic and uncased") {
  const LocalEncoder enc;
  const auto a = enc.encode("Lockdown measures led to isolation");
  CHECK(a.size() == 256);
  CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(enc.encode("Lockdown measures led to isolation") == a);
  CHECK(enc.encode("  lockdown MEASURES led to   isolation ") == a);
  CHECK(enc.encode("isolation") != a);
  CHECK(LocalEncoder(256, 1).encode("isolation") != LocalEncoder(256, 2).encode("isolation"));
}

TEST_CASE("local encoder rejects blank text and tiny dimensions") {
  CHECK(test::error_code([] { LocalEncoder().encode("   "); }) == "EmptyText");
  CHECK(test::error_code([] { LocalEncoder(4); }) == "ConfigInvalid");
}

TEST_CASE("local encoder never returns a zero vector when tokens cancel") {
  const LocalEncoder enc(8, 3);
  // Find two tokens landing in the same bucket with opposite signs.
  std::string first, second;
  for (int i = 0; i < 200 && second.empty(); ++i) {
    for (int j = i + 1; j < 200; ++j) {
      const auto a = enc.encode("t" + std::to_string(i));
      const auto b = enc.encode("t" + std::to_string(j));
      double dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
      if (dot < -0.999) {
        first = "t" + std::to_string(i);
        second = "t" + std::to_string(j);
        break;
      }
    }
  }
  REQUIRE_FALSE(second.empty());
  const auto v = enc.encode(first + " " + second);
  CHECK(norm(v) == doctest::Approx(1.0));
}

TEST_CASE("cosine similarity hand cases and errors") {
  const Vector a = {1.0, 1.0};
  const Vector b = {1.0, 0.0};
  CHECK(cosine_sim(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(cosine_sim(a, b) - 0.70711) < 1e-5);
  CHECK(cosine_sim(a, a) == doctest::Approx(1.0));
  CHECK(cosine_sim(Vector{1, 0}, Vector{-1, 0}) == -1.0);
  CHECK(test::error_code([&] { cosine_sim(a, Vector{1, 2, 3}); }) == "DimensionMismatch");
  CHECK(test::error_code([&] { cosine_sim(a, Vector{0, 0}); }) == "ZeroVector");
}

TEST_CASE("cosine similarity is exactly symmetric and within [-1, 1]") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    Vector x(7), y(7);
    for (auto& v : x) v = rng.uniform() * 2 - 1;
    for (auto& v : y) v = rng.uniform() * 2 - 1;
    const double c = cosine_sim(x, y);
    CHECK(c == cosine_sim(y, x));
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(cosine_sim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("disjoint token sets stay visibly apart under the local encoder") {
  const LocalEncoder enc;
  Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_words(rng, "a", 1 + static_cast<int>(rng.below(8)));
    const auto b = random_words(rng, "b", 1 + static_cast<int>(rng.below(8)));
    CHECK(std::abs(cosine_sim(enc.encode(a), enc.encode(b))) < 0.999);
  }
}

TEST_CASE("triples encode as subject relation object") {
  const LocalEncoder enc;
  const auto t = Triple::make("Lockdown measures", "led to", "isolation");
  CHECK(encode_triple(t, enc) == enc.encode("lockdown measures led to isolation"));
}

TEST_CASE("remote encoder posts to /embeddings and normalizes the reply") {
  test::FakeHttp http;
  http.push(200, R"({"data":[{"embedding":[3.0,4.0]}]})");
  const RemoteEncoder enc(std::shared_ptr<HttpTransport>(&http, [](HttpTransport*) {}),
                          RemoteEndpoint{"http://emb.local/v1", "embed-model", 2.0, 0});
  const auto v = enc.encode("hello");
  CHECK(v == Vector{0.6, 0.8});
  const auto reqs = http.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].url == "http://emb.local/v1/embeddings");
  const auto body = nlohmann::json::parse(reqs[0].body);
  CHECK(body["model"] == "embed-model");
  CHECK(body["input"] == "hello");
}

TEST_CASE("remote encoder reports unusable replies") {
  RemoteEndpoint ep{"http://emb.local/v1", "m", 2.0, 1};
  for (const char* body : {R"({"data":[]})", R"({"data":[{"embedding":[0,0]}]})", "garbage"}) {
    test::FakeHttp http;
    http.push(200, body);
    const RemoteEncoder enc(std::shared_ptr<HttpTransport>(&http, [](HttpTransport*) {}), ep);
    CAPTURE(body);
    CHECK(test::error_code([&] { enc.encode("x"); }) == "UnparseableResponse");
    CHECK(http.requests().size() == 2);
  }
  CHECK(test::error_code([&] { RemoteEncoder(nullptr, RemoteEndpoint{"x", "m", 0.0, 0}); }) == "ConfigInvalid");
}

TEST_CASE("the triple index covers every edge in key order and round-trips") {
  TemporalGraph g;
  g.merge(Triple::make("masks", "caused", "confusion", 1, 10));
  g.merge(Triple::make("lockdown", "led to", "isolation", 2, 20));
  g.merge(Triple::make("fear", "resulted in", "panic buying", 3, 30));
  g.merge(Triple::make("lockdown", "caused", "isolation", 4, 40));
  const LocalEncoder enc(64);
  const auto index = build_triple_index(g, enc);
  REQUIRE(index.entries.size() == 4);
  CHECK(index.dim == 64);
  for (std::size_t i = 1; i < index.entries.size(); ++i) CHECK(index.entries[i - 1].key < index.entries[i].key);
  CHECK(index.entries[0].key == EdgeKey{"fear", "resulted in", "panic buying"});
  CHECK(index.entries[0].src == *g.find_node("fear"));

  const auto parallel = build_triple_index(g, enc, 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(parallel.entries[i].vec == index.entries[i].vec);

  test::TempDir dir;
  write_triple_index_json(dir / "idx.json", index);
  const auto back = read_triple_index_json(dir / "idx.json", g);
  REQUIRE(back.entries.size() == 4);
  CHECK(index.encoder == "local:dim=64:seed=27495");
  CHECK(back.encoder == index.encoder);
  CHECK(LocalEncoder(64, 1).fingerprint() != index.encoder);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.entries[i].key == index.entries[i].key);
    CHECK(back.entries[i].vec == index.entries[i].vec);
    CHECK(back.entries[i].dst == index.entries[i].dst);
  }
  TemporalGraph other;
  other.merge(Triple::make("masks", "caused", "confusion"));
  CHECK(test::error_code([&] { read_triple_index_json(dir / "idx.json", other); }) == "CorruptFile");
}
