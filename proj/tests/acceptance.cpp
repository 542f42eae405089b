// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalkg/corpus.hpp"
#include "causalkg/evalkit.hpp"
#include "causalkg/extraction.hpp"
#include "causalkg/kgstore.hpp"
#include "causalkg/n2v.hpp"
#include "causalkg/pipeline.hpp"
#include "causalkg/retrieve.hpp"
#include "causalkg/rng.hpp"
#include "causalkg/text.hpp"

using namespace causalkg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  std::string name;
  double budget_s;  // runtime limit, 0 for none
  std::function<Outcome()> run;
};

fs::path source_dir() { return fs::path(CAUSALKG_SOURCE_DIR); }

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("causalkg-acceptance-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ---- improvement arithmetic ---------------------------------------------

Outcome improvement_anchor() {
  const double rag[] = {0.48357, 0.57528, 0.92563};
  const double base[] = {0.42168, 0.47733, 0.9220};
  const double published[] = {14.68, 20.52, 0.39};
  const auto report = build_report({CaseScores{"t", MetricTriple{rag[0], rag[1], rag[2]},
                                               MetricTriple{base[0], base[1], base[2]}, AnswerMode::kRag}});
  bool ok = report.average_improvement_pct && std::abs(*report.average_improvement_pct - 11.86) <= 0.05;
  std::string detail = "avg " + fmt("%.3f%%", report.average_improvement_pct.value_or(NAN));
  for (Metric m : kMetrics) {
    const auto v = report.improvement_pct[static_cast<int>(m)];
    ok = ok && v && std::abs(*v - published[static_cast<int>(m)]) <= 0.05;
    detail += std::string(", ") + std::string(metric_name(m)) + " " + fmt("%.3f%%", v.value_or(NAN));
  }

  // Same numbers through the eval stage reading a scores file.
  ScratchDir dir("anchor");
  const auto cfg = config_from_json({{"artifact_dir", (dir.path / "art").string()}}, dir.path);
  run_stage(Stage::kEval, cfg, StageArgs{{}, {}, "both", false, source_dir() / "data/fixtures/table1_scores.csv"});
  const auto doc = nlohmann::json::parse(slurp(dir.path / "art" / "report.json"));
  const double via_eval = doc.at("average_improvement_pct").get<double>();
  ok = ok && std::abs(via_eval - 11.86) <= 0.05;
  detail += "; eval stage avg " + fmt("%.3f%%", via_eval);
  return {ok, detail};
}

// ---- metric oracles -----------------------------------------------------

Outcome metric_oracles() {
  const double b = bleu("the cat sat", "the cat sat down");
  bool ok = std::abs(b - 0.71653) <= 1e-4;
  const LocalEncoder enc;
  Rng rng(2024);
  int reflexive = 0;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (std::uint64_t k = 0, n = 1 + rng.below(15); k < n; ++k) {
      if (!s.empty()) s += ' ';
      s += "tok" + std::to_string(rng.below(40));
    }
    if (std::abs(bleu(s, s) - 1.0) < 1e-12 && jaccard(s, s) == 1.0 &&
        std::abs(encoding_similarity(s, s, enc) - 1.0) <= 1e-9) {
      ++reflexive;
    }
  }
  const double j = jaccard("misinformation caused mask", "mask usage misinformation");
  ok = ok && reflexive == 200 && j == 0.5;
  return {ok, "bleu " + fmt("%.6f", b) + ", reflexive " + std::to_string(reflexive) + "/200, jaccard " + fmt("%.17g", j)};
}

// ---- softmax ------------------------------------------------------------

Outcome softmax_oracle() {
  Rng rng(50);
  EmbeddingMatrix e(50, 16);
  for (std::size_t r = 0; r < 50; ++r) {
    for (double& x : e.row(r)) x = rng.uniform() * 2.0 - 1.0;
  }
  double worst_sum = 0.0;
  for (NodeId u = 0; u < 50; ++u) {
    double s = 0.0;
    for (double p : softmax_row(e, u)) s += p;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  EmbeddingMatrix zero(50, 16);
  double worst_uniform = 0.0;
  for (NodeId v = 0; v < 50; ++v) worst_uniform = std::max(worst_uniform, std::abs(softmax_prob(zero, 3, v) - 1.0 / 50));
  EmbeddingMatrix hand(3, 2);
  hand.row(0)[0] = 1.0;
  hand.row(1)[0] = 1.0;
  const double expected = std::exp(1.0) / (2 * std::exp(1.0) + 1);
  const double got = softmax_prob(hand, 0, 1);
  const bool ok = worst_sum <= 1e-9 && worst_uniform <= 1e-12 && std::abs(got - expected) <= 1e-6;
  return {ok, "max |row sum - 1| " + fmt("%.1e", worst_sum) + ", max uniform err " + fmt("%.1e", worst_uniform) +
                  ", hand " + fmt("%.9f", got)};
}

// ---- barbell embedding quality -----------------------------------------

Outcome barbell() {
  TemporalGraph g;
  auto link = [&](const std::string& a, const std::string& b) { g.merge(Triple::make(a, "caused", b, 0, 100)); };
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) link("n" + std::to_string(5 * c + i), "n" + std::to_string(5 * c + j));
    }
  }
  link("n4", "p1");
  link("p1", "p2");
  link("p2", "n5");

  std::vector<NodeId> left, right;
  for (int i = 0; i < 5; ++i) {
    left.push_back(*g.find_node("n" + std::to_string(i)));
    right.push_back(*g.find_node("n" + std::to_string(5 + i)));
  }
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WalkConfig wc;
    wc.seed = seed;
    TrainConfig tc;
    tc.dim = 16;
    tc.seed = seed;
    const auto emb = train_skipgram(walk_sequences(sample_walks(g, wc)), tc, g.node_count()).embeddings;
    auto mean_cos = [&](const std::vector<std::pair<NodeId, NodeId>>& pairs) {
      double s = 0.0;
      for (auto [a, b] : pairs) s += cosine_sim(emb.row(a), emb.row(b));
      return s / static_cast<double>(pairs.size());
    };
    std::vector<std::pair<NodeId, NodeId>> intra, inter;
    for (const auto* side : {&left, &right}) {
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = i + 1; j < 5; ++j) intra.push_back({(*side)[i], (*side)[j]});
      }
    }
    for (NodeId a : left) {
      for (NodeId b : right) inter.push_back({a, b});
    }
    if (mean_cos(intra) > mean_cos(inter)) ++wins;
  }
  return {wins >= 19, std::to_string(wins) + "/20 seeds with intra > inter"};
}

// ---- temporal walks -----------------------------------------------------

Outcome temporal_walks() {
  Rng rng(99);
  TemporalGraph g;
  for (int i = 0; i < 200; ++i) {
    g.merge(Triple::make("v" + std::to_string(rng.below(60)), "caused", "v" + std::to_string(rng.below(60)),
                         static_cast<TweetId>(i), static_cast<Timestamp>(rng.below(10000))));
  }
  WalkConfig wc;
  wc.temporal = true;
  const auto walks = sample_walks(g, wc);
  std::size_t valid = 0;
  for (const auto& w : walks) valid += std::is_sorted(w.step_times.begin(), w.step_times.end());

  TemporalGraph path;
  path.merge(Triple::make("a", "caused", "b", 0, 10));
  path.merge(Triple::make("b", "caused", "c", 1, 5));
  const NodeId a = *path.find_node("a");
  std::size_t from_a = 0, short_walks = 0;
  for (const auto& w : sample_walks(path, wc)) {
    if (w.nodes.front() != a) continue;
    ++from_a;
    short_walks += w.nodes.size() == 2;
  }
  const bool ok = valid == walks.size() && from_a > 0 && short_walks == from_a;
  return {ok, std::to_string(valid) + "/" + std::to_string(walks.size()) + " non-decreasing; " +
                  std::to_string(short_walks) + "/" + std::to_string(from_a) + " walks from a have length 2"};
}

// ---- determinism --------------------------------------------------------

PipelineConfig fixture_config(const fs::path& art) {
  const fs::path fixtures = source_dir() / "data" / "fixtures";
  const nlohmann::ordered_json user = {{"corpus", {{"path", (fixtures / "covid_tweets_1000.csv").string()}}},
                                       {"artifact_dir", art.string()},
                                       {"cases", (fixtures / "cases.jsonl").string()}};
  // What --mock-llm selects, plus single-worker training.
  return config_from_json(user, fixtures,
                          {"extractor.kind=rule", "encoder.kind=local", "generator.kind=mock-echo", "train.workers=1",
                           "seed=7"});
}

std::string manifest_without_durations(const fs::path& p) {
  auto doc = nlohmann::ordered_json::parse(slurp(p));
  for (auto& [name, entry] : doc.at("stages").items()) entry.erase("duration_s");
  return doc.dump();
}

Outcome determinism() {
  ScratchDir dir("determinism");
  double worst = 0.0;
  for (const char* run : {"a", "b"}) {
    const auto start = std::chrono::steady_clock::now();
    run_all(fixture_config(dir.path / run));
    worst = std::max(worst, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::size_t files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(dir.path / "a")) {
    ++files;
    const auto other = dir.path / "b" / entry.path().filename();
    if (!fs::exists(other)) continue;
    if (entry.path().filename() == "manifest.json") {
      same += manifest_without_durations(entry.path()) == manifest_without_durations(other);
    } else {
      same += slurp(entry.path()) == slurp(other);
    }
  }
  std::size_t files_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path / "b")) ++files_b;
  const bool ok = files > 0 && same == files && files_b == files && worst < 60.0;
  return {ok, std::to_string(same) + "/" + std::to_string(files) + " files identical, slowest run " + fmt("%.1fs", worst)};
}

// ---- planted context ----------------------------------------------------

std::string pseudo_word(Rng& rng, std::set<std::string>& used) {
  static const char* kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "bu", "da", "fe", "go", "hi", "ju", "pe"};
  for (;;) {
    std::string w;
    for (int i = 0; i < 4; ++i) w += kSyllables[rng.below(std::size(kSyllables))];
    if (used.insert(w).second) return w;
  }
}

Outcome planted_context() {
  ScratchDir dir("planted");
  Rng rng(314);
  std::set<std::string> used;
  const char* kVerbs[] = {"caused", "led to", "resulted in"};

  struct Row {
    std::string text;
    bool planted;
  };
  std::vector<Row> rows;
  std::vector<std::vector<std::string>> planted(25);
  std::vector<EvalCase> cases;
  for (int q = 0; q < 25; ++q) {
    const std::string effect = pseudo_word(rng, used) + " " + pseudo_word(rng, used);
    std::string truth;
    for (int k = 0; k < 3; ++k) {
      const std::string s = pseudo_word(rng, used) + " " + pseudo_word(rng, used) + " " + kVerbs[k] + " " + effect;
      planted[q].push_back(s);
      rows.push_back({s, true});
      truth += (truth.empty() ? "" : " ") + s;
    }
    char qid[8];
    std::snprintf(qid, sizeof qid, "p%02d", q);
    cases.push_back({qid, "what caused " + effect, truth});
  }
  // Noise: causal sentences over unrelated words and plain chatter.
  while (rows.size() < 200) {
    std::string s = pseudo_word(rng, used) + " " + pseudo_word(rng, used);
    if (rng.below(2) == 0) {
      s += std::string(" ") + kVerbs[rng.below(3)] + " " + pseudo_word(rng, used);
    } else {
      s += " is " + pseudo_word(rng, used) + " today";
    }
    rows.push_back({s, false});
  }
  // Shuffle so planted sentences are spread over the timeline.
  for (std::size_t i = rows.size() - 1; i > 0; --i) std::swap(rows[i], rows[rng.below(i + 1)]);

  std::string csv = "date,text\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += format_timestamp(1595548800 + static_cast<Timestamp>(i) * 3600) + "," + rows[i].text + "\n";
  }
  spit(dir.path / "corpus.csv", csv);
  write_cases_jsonl(dir.path / "cases.jsonl", cases);
  const auto cfg = config_from_json({{"corpus", {{"path", "corpus.csv"}}}, {"artifact_dir", "art"}, {"cases", "cases.jsonl"}},
                                    dir.path, {"generator.kind=mock-echo", "encoder.kind=local"});
  run_all(cfg, StageArgs{{}, {}, "both", true, {}});

  int recovered = 0;
  std::ifstream explain(dir.path / "art" / "explain.jsonl");
  std::size_t q = 0;
  for (std::string line; std::getline(explain, line); ++q) {
    const auto doc = nlohmann::json::parse(line);
    std::set<std::string> got;
    for (const auto& s : doc.at("sentences")) got.insert(s.at("text").get<std::string>());
    int hits = 0;
    for (const auto& s : planted.at(q)) hits += got.count(s) ? 1 : 0;
    recovered += hits >= 2;
  }
  const auto report = nlohmann::json::parse(slurp(dir.path / "art" / "report.json"));
  const auto& agg = report.at("aggregates");
  const double rag_bleu = agg.at("rag").at("bleu").at("mean");
  const double base_bleu = agg.at("baseline").at("bleu").at("mean");
  const double rag_jac = agg.at("rag").at("jaccard").at("mean");
  const double base_jac = agg.at("baseline").at("jaccard").at("mean");
  const bool ok = q == 25 && recovered >= 20 && rag_bleu > base_bleu && rag_jac > base_jac;
  return {ok, std::to_string(recovered) + "/25 queries with >= 2 of 3 planted; bleu " + fmt("%.3f", rag_bleu) + " vs " +
                  fmt("%.3f", base_bleu) + ", jaccard " + fmt("%.3f", rag_jac) + " vs " + fmt("%.3f", base_jac)};
}

// ---- merge idempotence --------------------------------------------------

Outcome merge_idempotence() {
  const auto ing = ingest(source_dir() / "data/fixtures/covid_tweets_1000.csv", "text", "date",
                          ContractionDictionary::builtin());
  RuleExtractor ex;
  const auto triples = extract_corpus(ing.tweets, ex, {1, false}).triples;
  const auto once = build_graph(triples);
  auto twice = build_graph(triples);
  for (const auto& t : triples) twice.merge(t);
  std::set<std::string> names;
  for (const auto& t : triples) {
    names.insert(text::normalize_phrase(t.subject));
    names.insert(text::normalize_phrase(t.object));
  }
  const bool ok = !triples.empty() && once == twice && once.node_count() == names.size();
  return {ok, std::to_string(triples.size()) + " triples, " + std::to_string(once.node_count()) + " nodes, " +
                  std::to_string(names.size()) + " distinct names, double merge " + (once == twice ? "equal" : "differs")};
}

// ---- K / threshold ------------------------------------------------------

Outcome k_threshold() {
  TripleIndex index;
  index.dim = 2;
  for (int i = 0; i < 30; ++i) {
    const double angle = 0.02 * i;
    index.entries.push_back({EdgeKey{"s" + std::to_string(i), "caused", "o"}, {std::cos(angle), std::sin(angle)}, 0, 0});
  }
  const Vector query = {1.0, 0.0};
  RetrievalConfig cfg;
  std::size_t above = 0;
  for (const auto& e : index.entries) above += cosine_sim(query, e.vec) >= cfg.sim_threshold;
  const auto top = rank_candidates(query, index, cfg).size();
  cfg.sim_threshold = 1.01;
  const auto none = rank_candidates(query, index, cfg).size();
  const bool ok = above == 30 && top == 25 && none == 0;
  return {ok, std::to_string(above) + " above threshold -> " + std::to_string(top) + " returned; threshold 1.01 -> " +
                  std::to_string(none)};
}

}  // namespace

int main() {
  std::vector<Check> checks = {
      {"improvement-anchor", 1.0, improvement_anchor},
      {"metric-oracles", 0.0, metric_oracles},
      {"softmax-oracle", 0.0, softmax_oracle},
      {"barbell-embedding", 30.0, barbell},
      {"temporal-walks", 0.0, temporal_walks},
      {"determinism", 0.0, determinism},
      {"planted-context", 30.0, planted_context},
      {"merge-idempotence", 0.0, merge_idempotence},
      {"k-threshold", 0.0, k_threshold},
  };
  int failed = 0;
  bool all_substitutes_pass = true;
  for (const auto& c : checks) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0fs", c.budget_s) + " budget";
    }
    std::printf("%s %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
    if (c.name != "improvement-anchor") all_substitutes_pass = all_substitutes_pass && o.pass;
  }
  // Absolute published metric values depend on services and ground truths
  // that are not available; the property checks above stand in for them.
  std::printf("%s absolute-metrics-substitution: property checks %s\n", all_substitutes_pass ? "PASS" : "FAIL",
              all_substitutes_pass ? "all pass" : "have failures");
  if (!all_substitutes_pass) ++failed;
  return failed == 0 ? 0 : 1;
}
