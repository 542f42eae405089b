#include <doctest.h>

#include <fstream>

#include "causalkg/error.hpp"
#include "causalkg/evalkit.hpp"
#include "causalkg/pipeline.hpp"
#include "causalkg/rng.hpp"
#include "support.hpp"

using namespace causalkg;
namespace fs = std::filesystem;

namespace {

const char* kCsv =
    "user_name,date,text\n"
    "u1,2020-07-25 10:00:00,Lockdown measures led to isolation #stayhome\n"
    "u2,2020-07-25 11:00:00,Isolation increased awareness of immediate surroundings\n"
    "u3,2020-07-25 12:00:00,The pandemic restricted activities https://t.co/x\n"
    "u4,2020-07-26 09:00:00,Heavy rain caused flooding downtown\n"
    "u5,2020-07-26 10:30:00,Panic buying resulted in empty shelves\n"
    "u6,2020-07-27 08:15:00,Just a normal day with nothing to say\n";

const char* kCases =
    R"({"qid":"c1","query":"isolation","truth":"lockdown measures led to isolation"})" "\n"
    R"({"qid":"c2","query":"empty shelves","truth":"panic buying resulted in empty shelves"})" "\n";

struct Workspace {
  test::TempDir dir;
  Workspace() {
    test::write_file(dir / "tweets.csv", kCsv);
    test::write_file(dir / "cases.jsonl", kCases);
    test::write_file(dir / "config.json",
                     R"({"corpus":{"path":"tweets.csv"},"artifact_dir":"art","cases":"cases.jsonl",)"
                     R"("train":{"dim":16,"epochs":2},"walk":{"walks_per_node":4}})");
  }
  PipelineConfig config(std::vector<std::string> overrides = {}) const {
    return load_config(dir / "config.json", overrides);
  }
  fs::path art() const { return dir / "art"; }
};

std::string code_of(Stage s, const PipelineConfig& cfg, const StageArgs& args = {}) {
  return test::error_code([&] { run_stage(s, cfg, args); });
}

}  // namespace

TEST_CASE("config defaults, relative paths and overrides") {
  Workspace ws;
  const auto cfg = ws.config({"walk.p=0.5", "generator.kind=mock-fixed", "generator.fixed_text=hi there"});
  CHECK(cfg.corpus_path == ws.dir / "tweets.csv");
  CHECK(cfg.artifact_dir == ws.art());
  CHECK(cfg.walk.p == 0.5);
  CHECK(cfg.generator_kind == "mock-fixed");
  CHECK(cfg.generator_fixed_text == "hi there");
  CHECK(cfg.retrieval.k_contextual == 25);
  CHECK(cfg.retrieval.sim_threshold == 0.35);
  CHECK(cfg.train.dim == 16);
  CHECK(cfg.walk.seed == derive_seed(1, 0x77616c6b));
  CHECK(ws.config({"seed=2"}).walk.seed != cfg.walk.seed);
  CHECK(ws.config({"walk.seed=5"}).walk.seed == 5);
}

TEST_CASE("invalid configs are rejected with ConfigInvalid") {
  Workspace ws;
  for (const char* bad : {"walk.nope=1", "walk.p=0", "walk.p=\"fast\"", "retrieval.sim_threshold=1.5",
                          "retrieval.k_contextual=0", "encoder.kind=bert", "encoder.dim=4", "walk=1",
                          "generator.kind=mock-fixed", "no_equals_sign", "generator.endpoint.timeout_s=0"}) {
    CAPTURE(bad);
    CHECK(test::error_code([&] { ws.config({bad}); }) == "ConfigInvalid");
  }
  test::write_file(ws.dir / "typo.json", R"({"corpus":{"paht":"x.csv"}})");
  CHECK(test::error_code([&] { load_config(ws.dir / "typo.json"); }) == "ConfigInvalid");
  test::write_file(ws.dir / "broken.json", "{");
  CHECK(test::error_code([&] { load_config(ws.dir / "broken.json"); }) == "ConfigInvalid");
  test::write_file(ws.dir / "nocorpus.json", "{}");
  CHECK(code_of(Stage::kIngest, load_config(ws.dir / "nocorpus.json")) == "ConfigInvalid");
}

TEST_CASE("stages refuse to run before their prerequisites") {
  Workspace ws;
  const auto cfg = ws.config();
  CHECK(code_of(Stage::kExtract, cfg) == "MissingPrerequisite");
  run_stage(Stage::kIngest, cfg);
  run_stage(Stage::kExtract, cfg);
  run_stage(Stage::kBuild, cfg);
  try {
    run_stage(Stage::kQuery, cfg, StageArgs{"isolation", {}, "rag", false, {}});
    FAIL("query ran without embeddings");
  } catch (const Error& e) {
    CHECK(e.code() == "MissingPrerequisite");
    CHECK(std::string(e.what()).find("embed") != std::string::npos);
    CHECK(e.exit_code() == 5);
  }
  // The baseline never needs graph artifacts.
  CHECK(code_of(Stage::kQuery, cfg, StageArgs{"isolation", {}, "baseline", false, {}}) == "");
  CHECK(code_of(Stage::kEval, cfg) == "NoCases");
}

TEST_CASE("a full run writes every artifact and a consistent manifest") {
  Workspace ws;
  const auto cfg = ws.config();
  const auto summary = run_all(cfg);
  for (const char* f : {"tweets.jsonl", "triples.jsonl", "nodes.jsonl", "edges.jsonl",
                        "embeddings.json", "triple_index.json", "answers.jsonl", "cases.jsonl", "scores.csv",
                        "report.json", "manifest.json"}) {
    CAPTURE(std::string(f));
    CHECK(fs::exists(ws.art() / f));
  }
  const auto manifest = nlohmann::json::parse(test::read_file(ws.art() / "manifest.json"));
  for (Stage s : kAllStages) {
    const auto& entry = manifest["stages"][std::string(stage_name(s))];
    CHECK(entry.contains("config_sha256"));
    for (const auto& [name, hash] : entry["outputs"].items()) CHECK(hash == sha256_file(ws.art() / name));
  }
  CHECK(manifest["stages"]["ingest"]["inputs"]["corpus"] == sha256_file(ws.dir / "tweets.csv"));
  const auto answers = read_answers_jsonl(ws.art() / "answers.jsonl");
  REQUIRE(answers.size() == 4);
  CHECK(answers[0].mode == AnswerMode::kRag);
  CHECK(answers[1].mode == AnswerMode::kBaseline);
  CHECK(read_scores_csv(ws.art() / "scores.csv").size() == 2);
}

TEST_CASE("tampering with an artifact or its inputs is detected") {
  Workspace ws;
  const auto cfg = ws.config();
  run_all(cfg);
  {
    std::ofstream out(ws.art() / "triples.jsonl", std::ios::app);
    out << "\n";
  }
  CHECK(code_of(Stage::kBuild, cfg) == "StaleArtifact");
  // Re-running the owning stage repairs the chain.
  run_stage(Stage::kExtract, cfg);
  CHECK(code_of(Stage::kBuild, cfg) == "");

  // A changed corpus reaches the chain through ingest; stages built on the
  // old tweets then refuse to run.
  run_all(cfg);
  test::write_file(ws.dir / "tweets.csv", std::string(kCsv) + "u7,2020-07-28 08:00:00,Rain caused floods\n");
  run_stage(Stage::kIngest, cfg);
  CHECK(code_of(Stage::kBuild, cfg) == "StaleArtifact");
  CHECK(code_of(Stage::kQuery, cfg, StageArgs{"isolation", {}, "rag", false, {}}) == "StaleArtifact");

  run_all(cfg);
  // The index remembers its encoder, so a query with another one is refused.
  CHECK(code_of(Stage::kIndex, ws.config({"encoder.dim=32"})) == "");
  for (const char* other : {"encoder.dim=64", "encoder.seed=7"}) {
    CAPTURE(other);
    CHECK(code_of(Stage::kQuery, ws.config({other}), StageArgs{"isolation", {}, "rag", false, {}}) == "StaleArtifact");
  }
  CHECK(code_of(Stage::kQuery, ws.config({"encoder.dim=32"}), StageArgs{"isolation", {}, "rag", false, {}}) == "");
}

TEST_CASE("two runs with the same seed produce identical artifacts") {
  Workspace a;
  Workspace b;
  run_all(a.config());
  run_all(b.config());
  for (const auto& entry : fs::directory_iterator(a.art())) {
    const auto name = entry.path().filename();
    if (name == "manifest.json") continue;
    CAPTURE(name);
    CHECK(test::read_file(entry.path()) == test::read_file(b.art() / name));
  }
}

TEST_CASE("query options: single query, explain and scores-only eval") {
  Workspace ws;
  const auto cfg = ws.config();
  run_all(cfg);
  const auto summary = run_stage(Stage::kQuery, cfg, StageArgs{"isolation", {}, "rag", true, {}});
  const auto answers = read_answers_jsonl(ws.art() / "answers.jsonl");
  REQUIRE(answers.size() == 1);
  CHECK(answers[0].qid == "q1");
  CHECK_FALSE(answers[0].text.empty());
  const auto explain = nlohmann::json::parse(test::read_file(ws.art() / "explain.jsonl"));
  CHECK(explain["query"] == "isolation");
  CHECK_FALSE(explain["sentences"].empty());
  CHECK(code_of(Stage::kEval, cfg) == "NoCases");

  // A query nothing in the graph resembles is answered with NoContext.
  run_stage(Stage::kQuery, cfg, StageArgs{"purple xylophone", {}, "rag", false, {}});
  const auto none = read_answers_jsonl(ws.art() / "answers.jsonl");
  REQUIRE(none.size() == 1);
  CHECK(none[0].error == "NoContext");
  CHECK(none[0].text.empty());

  test::write_file(ws.dir / "scores.csv",
                   "qid,mode,metric,value\n"
                   "t,rag,bleu,0.48357\nt,rag,jaccard,0.57528\nt,rag,cosine,0.92563\n"
                   "t,baseline,bleu,0.42168\nt,baseline,jaccard,0.47733\nt,baseline,cosine,0.9220\n");
  run_stage(Stage::kEval, cfg, StageArgs{{}, {}, "both", false, ws.dir / "scores.csv"});
  const auto report = nlohmann::json::parse(test::read_file(ws.art() / "report.json"));
  CHECK(std::abs(report["average_improvement_pct"].get<double>() - 11.86) < 0.05);
}
