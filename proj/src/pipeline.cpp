#include "causalkg/pipeline.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include "causalkg/corpus.hpp"
#include "causalkg/encode.hpp"
#include "causalkg/error.hpp"
#include "causalkg/evalkit.hpp"
#include "causalkg/extraction.hpp"
#include "causalkg/generate.hpp"
#include "causalkg/kgstore.hpp"
#include "causalkg/rng.hpp"

namespace causalkg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson endpoint_json(const char* model) {
  return {{"base_url", "https://api.openai.com/v1"}, {"model", model}, {"timeout_s", 30.0}, {"max_retries", 2}};
}

// Every key of `user` must exist in `defaults`; objects merge recursively.
void merge_into(ojson& target, const ojson& user, const std::string& prefix) {
  if (!user.is_object()) throw config_error(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string field = prefix.empty() ? key : prefix + "." + key;
    if (!target.contains(key)) throw config_error(field, "unknown key");
    ojson& slot = target[key];
    if (slot.is_object()) {
      merge_into(slot, value, field);
    } else {
      slot = value;
    }
  }
}

void apply_override(ojson& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw config_error(assignment, "expected key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  ojson* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw config_error(path, "unknown key");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw config_error(path, "cannot replace a whole section");
  ojson value = ojson::parse(raw, nullptr, false);
  *node = value.is_discarded() ? ojson(raw) : value;
}

// Typed access with ConfigInvalid on mismatch.
template <typename T>
T field(const ojson& doc, const std::string& dotted) {
  const ojson* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    node = &node->at(dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(dotted, "has the wrong type");
  }
}

bool is_null(const ojson& doc, const std::string& section, const std::string& key) {
  return doc.at(section).at(key).is_null();
}

std::size_t positive_size(const ojson& doc, const std::string& dotted) {
  const auto v = field<long long>(doc, dotted);
  if (v < 1) throw config_error(dotted, "must be >= 1");
  return static_cast<std::size_t>(v);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

fs::path optional_path(const ojson& doc, const std::string& dotted, const fs::path& base) {
  const ojson* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    node = &node->at(dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_null()) return {};
  if (!node->is_string()) throw config_error(dotted, "must be a path string or null");
  return resolve(base, node->get<std::string>());
}

RemoteEndpoint endpoint_from(const ojson& doc, const std::string& section) {
  RemoteEndpoint e;
  e.base_url = field<std::string>(doc, section + ".endpoint.base_url");
  e.model = field<std::string>(doc, section + ".endpoint.model");
  e.timeout_s = field<double>(doc, section + ".endpoint.timeout_s");
  e.max_retries = field<int>(doc, section + ".endpoint.max_retries");
  if (!(e.timeout_s > 0.0)) throw config_error(section + ".endpoint.timeout_s", "must be > 0");
  if (e.max_retries < 0) throw config_error(section + ".endpoint.max_retries", "must be >= 0");
  return e;
}

void require_one_of(const std::string& value, std::initializer_list<const char*> allowed, const std::string& name) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  throw config_error(name, "unsupported value '" + value + "'");
}

// ---- manifest ----------------------------------------------------------

constexpr const char* kManifest = "manifest.json";

struct ArtifactOwner {
  const char* file;
  Stage stage;
};

constexpr ArtifactOwner kOwners[] = {
    {"tweets.jsonl", Stage::kIngest},      {"triples.jsonl", Stage::kExtract},
    {"nodes.jsonl", Stage::kBuild},        {"edges.jsonl", Stage::kBuild},
    {"embeddings.json", Stage::kEmbed},    {"triple_index.json", Stage::kIndex},
    {"answers.jsonl", Stage::kQuery},      {"cases.jsonl", Stage::kQuery},
    {"explain.jsonl", Stage::kQuery},      {"report.json", Stage::kEval},
    {"scores.csv", Stage::kEval},
};

std::optional<Stage> owner_of(const std::string& file) {
  for (const auto& o : kOwners) {
    if (file == o.file) return o.stage;
  }
  return std::nullopt;
}

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
    const fs::path path = dir_ / kManifest;
    if (!fs::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    try {
      doc_ = ojson::parse(in).at("stages");
    } catch (const nlohmann::json::exception& e) {
      throw data_error("CorruptFile", path.string() + ": " + e.what());
    }
  }

  const ojson* entry(Stage s) const {
    const std::string name(stage_name(s));
    return doc_.contains(name) ? &doc_[name] : nullptr;
  }

  // Checks that `file` came from its owning stage and that the owner's own
  // internal inputs still match, recursively.
  void require(const std::string& file) const {
    const Stage owner = *owner_of(file);
    const ojson* e = entry(owner);
    const fs::path path = dir_ / file;
    if (e == nullptr || !e->at("outputs").contains(file) || !fs::exists(path)) {
      throw data_error("MissingPrerequisite", std::string(stage_name(owner)) + " (" + file + " not produced yet)");
    }
    if (sha256_file(path) != e->at("outputs").at(file).get<std::string>()) {
      throw data_error("StaleArtifact", file + " no longer matches the hash recorded by " +
                                            std::string(stage_name(owner)) + "; re-run that stage");
    }
    for (const auto& [input, hash] : e->at("inputs").items()) {
      if (!owner_of(input)) continue;
      require(input);
      if (sha256_file(dir_ / input) != hash.get<std::string>()) {
        throw data_error("StaleArtifact", std::string(stage_name(owner)) + " was built from an older " + input +
                                              "; re-run " + std::string(stage_name(owner)));
      }
    }
  }

  void record(Stage s, ojson entry) {
    doc_[std::string(stage_name(s))] = std::move(entry);
    ojson ordered = ojson::object();
    for (Stage st : kAllStages) {
      const std::string name(stage_name(st));
      if (doc_.contains(name)) ordered[name] = doc_[name];
    }
    doc_ = std::move(ordered);
    const fs::path path = dir_ / kManifest;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out << ojson{{"stages", doc_}}.dump(2) << '\n';
    if (!out) throw io_error("write failed: " + path.string());
  }

 private:
  fs::path dir_;
  ojson doc_ = ojson::object();
};

// ---- services ----------------------------------------------------------

std::shared_ptr<HttpTransport> shared_transport() {
  static std::shared_ptr<HttpTransport> t = make_http_transport();
  return t;
}

std::unique_ptr<Encoder> make_encoder(const PipelineConfig& cfg) {
  if (cfg.encoder_kind == "remote") return std::make_unique<RemoteEncoder>(shared_transport(), cfg.encoder_endpoint);
  return std::make_unique<LocalEncoder>(cfg.encoder_dim, cfg.encoder_seed);
}

std::unique_ptr<Generator> make_generator(const PipelineConfig& cfg) {
  if (cfg.generator_kind == "remote") {
    return std::make_unique<RemoteGenerator>(shared_transport(), cfg.generator_endpoint, cfg.temperature);
  }
  if (cfg.generator_kind == "mock-fixed") return std::make_unique<MockFixedGenerator>(cfg.generator_fixed_text);
  return std::make_unique<MockEchoGenerator>();
}

ContractionDictionary load_dictionary(const PipelineConfig& cfg) {
  return cfg.contractions.empty() ? ContractionDictionary::builtin() : ContractionDictionary::from_file(cfg.contractions);
}

std::string config_hash(const PipelineConfig& cfg) {
  ojson doc = cfg.doc;
  doc.erase("artifact_dir");
  return sha256_hex(doc.dump());
}

ojson hashes(const fs::path& dir, std::initializer_list<std::string> files) {
  ojson out = ojson::object();
  for (const auto& f : files) {
    if (fs::exists(dir / f)) out[f] = sha256_file(dir / f);
  }
  return out;
}

// ---- stages ------------------------------------------------------------

struct StageRecord {
  ojson inputs = ojson::object();
  ojson outputs = ojson::object();
  ojson summary = ojson::object();
};

StageRecord do_ingest(const PipelineConfig& cfg) {
  if (cfg.corpus_path.empty()) throw config_error("corpus.path", "is required");
  StageRecord rec;
  rec.inputs["corpus"] = sha256_file(cfg.corpus_path);
  if (!cfg.contractions.empty()) rec.inputs["contractions"] = sha256_file(cfg.contractions);
  const auto dict = load_dictionary(cfg);
  auto result = ingest(cfg.corpus_path, cfg.text_column, cfg.date_column, dict);
  write_tweets_jsonl(cfg.artifact_dir / "tweets.jsonl", result.tweets);
  rec.outputs = hashes(cfg.artifact_dir, {"tweets.jsonl"});
  rec.summary = {{"tweets", result.tweets.size()},
                 {"malformed_lines", result.malformed_lines.size()},
                 {"bad_dates", result.bad_dates},
                 {"empty_texts", result.empty_texts}};
  return rec;
}

StageRecord do_extract(const PipelineConfig& cfg, const Manifest& m) {
  m.require("tweets.jsonl");
  StageRecord rec;
  rec.inputs = hashes(cfg.artifact_dir, {"tweets.jsonl"});
  if (!cfg.lexicon.empty()) rec.inputs["lexicon"] = sha256_file(cfg.lexicon);
  const auto tweets = read_tweets_jsonl(cfg.artifact_dir / "tweets.jsonl");
  std::unique_ptr<Extractor> extractor;
  if (cfg.extractor_kind == "remote") {
    extractor = std::make_unique<RemoteExtractor>(shared_transport(), cfg.extractor_endpoint);
  } else {
    extractor = std::make_unique<RuleExtractor>(cfg.lexicon.empty() ? RelationLexicon::builtin()
                                                                     : RelationLexicon::from_file(cfg.lexicon));
  }
  const auto run = extract_corpus(tweets, *extractor, {cfg.extract_concurrency, cfg.skip_extraction_errors});
  write_triples_jsonl(cfg.artifact_dir / "triples.jsonl", run.triples);
  rec.outputs = hashes(cfg.artifact_dir, {"triples.jsonl"});
  rec.summary = {{"triples", run.triples.size()}, {"failed_tweets", run.failed_tweets}};
  return rec;
}

StageRecord do_build(const PipelineConfig& cfg, const Manifest& m) {
  m.require("triples.jsonl");
  StageRecord rec;
  rec.inputs = hashes(cfg.artifact_dir, {"triples.jsonl"});
  const auto triples = read_triples_jsonl(cfg.artifact_dir / "triples.jsonl");
  const TemporalGraph g = build_graph(triples);
  g.save(cfg.artifact_dir);
  rec.outputs = hashes(cfg.artifact_dir, {"nodes.jsonl", "edges.jsonl"});
  rec.summary = {{"nodes", g.node_count()}, {"edges", g.edge_count()}};
  return rec;
}

StageRecord do_embed(const PipelineConfig& cfg, const Manifest& m) {
  m.require("nodes.jsonl");
  m.require("edges.jsonl");
  StageRecord rec;
  rec.inputs = hashes(cfg.artifact_dir, {"nodes.jsonl", "edges.jsonl"});
  const TemporalGraph g = TemporalGraph::load(cfg.artifact_dir);
  const auto walks = sample_walks(g, cfg.walk, static_cast<std::size_t>(field<long long>(cfg.doc, "walk.workers")));
  const auto sequences = walk_sequences(walks);
  const auto trained = train_skipgram(sequences, cfg.train, g.node_count());
  std::vector<std::string> names;
  for (NodeId n = 0; n < g.node_count(); ++n) names.push_back(g.name(n));
  write_embeddings_json(cfg.artifact_dir / "embeddings.json", trained.embeddings, names);
  rec.outputs = hashes(cfg.artifact_dir, {"embeddings.json"});
  rec.summary = {{"nodes", g.node_count()}, {"walks", walks.size()}, {"dim", trained.embeddings.dim()}};
  if (!trained.epoch_loss.empty()) rec.summary["final_loss"] = trained.epoch_loss.back();
  return rec;
}

StageRecord do_index(const PipelineConfig& cfg, const Manifest& m) {
  m.require("nodes.jsonl");
  m.require("edges.jsonl");
  StageRecord rec;
  rec.inputs = hashes(cfg.artifact_dir, {"nodes.jsonl", "edges.jsonl"});
  const TemporalGraph g = TemporalGraph::load(cfg.artifact_dir);
  const auto encoder = make_encoder(cfg);
  const auto index = build_triple_index(g, *encoder, cfg.query_concurrency);
  write_triple_index_json(cfg.artifact_dir / "triple_index.json", index);
  rec.outputs = hashes(cfg.artifact_dir, {"triple_index.json"});
  rec.summary = {{"entries", index.entries.size()}, {"dim", index.dim}};
  return rec;
}

PromptTemplate prompt_template(const PipelineConfig& cfg) {
  const auto& standard = PromptTemplate::standard();
  if (cfg.prompt_system.empty() && cfg.prompt_layout.empty()) return standard;
  return PromptTemplate(cfg.prompt_system.empty() ? standard.system() : cfg.prompt_system,
                        cfg.prompt_layout.empty() ? standard.layout() : cfg.prompt_layout);
}

StageRecord do_query(const PipelineConfig& cfg, const Manifest& m, const StageArgs& args) {
  const bool want_rag = args.mode == "rag" || args.mode == "both";
  const bool want_base = args.mode == "baseline" || args.mode == "both";
  if (!want_rag && !want_base) throw Error(ErrorKind::kUsage, "Usage", "--mode must be rag, baseline or both");

  std::vector<EvalCase> cases;
  fs::path cases_path = !args.cases.empty() ? args.cases : cfg.cases;
  if (!args.query.empty()) {
    cases.push_back({"q1", args.query, ""});
    cases_path.clear();
  } else if (!cases_path.empty()) {
    cases = read_cases_jsonl(cases_path);
  } else {
    throw Error(ErrorKind::kUsage, "Usage", "query needs --query TEXT or --cases PATH");
  }
  if (cases.empty()) throw data_error("EmptyInput", "no queries to answer");

  m.require("tweets.jsonl");
  if (want_rag) {
    for (const char* f : {"nodes.jsonl", "edges.jsonl", "embeddings.json", "triple_index.json"}) m.require(f);
  }
  StageRecord rec;
  rec.inputs = want_rag ? hashes(cfg.artifact_dir, {"tweets.jsonl", "nodes.jsonl", "edges.jsonl", "embeddings.json",
                                                    "triple_index.json"})
                        : hashes(cfg.artifact_dir, {"tweets.jsonl"});
  if (!cases_path.empty()) rec.inputs["cases"] = sha256_file(cases_path);

  const TweetStore corpus(read_tweets_jsonl(cfg.artifact_dir / "tweets.jsonl"));
  const auto dict = load_dictionary(cfg);
  const auto encoder = make_encoder(cfg);
  const auto generator = make_generator(cfg);
  const PromptTemplate tpl = prompt_template(cfg);
  const bool stamped = cfg.retrieval.temporal_order;

  std::optional<TemporalGraph> graph;
  std::optional<TripleIndex> index;
  EmbeddingMatrix embeddings;
  std::optional<Retriever> retriever;
  if (want_rag) {
    graph = TemporalGraph::load(cfg.artifact_dir);
    index = read_triple_index_json(cfg.artifact_dir / "triple_index.json", *graph);
    if (index->encoder != encoder->fingerprint()) {
      throw data_error("StaleArtifact", "triple_index.json was built with encoder " + index->encoder +
                                            " but the config selects " + encoder->fingerprint() + "; re-run index");
    }
    auto named = read_embeddings_json(cfg.artifact_dir / "embeddings.json");
    for (NodeId n = 0; n < graph->node_count(); ++n) {
      if (n >= named.names.size() || named.names[n] != graph->name(n)) {
        throw data_error("MisalignedEmbeddings", "embeddings.json does not match the graph's nodes");
      }
    }
    embeddings = std::move(named.matrix);
    retriever.emplace(*graph, *index, embeddings, corpus, *encoder, dict, cfg.retrieval);
  }
  std::optional<BaselineContext> base_ctx;
  if (want_base) base_ctx = baseline_context(corpus, cfg.char_budget);

  struct Slot {
    std::optional<Answer> rag, base;
    std::string explain;
  };
  std::vector<Slot> slots(cases.size());
  std::vector<std::exception_ptr> errors(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        const auto& c = cases[i];
        if (want_rag) {
          const Retrieval r = retriever->retrieve(c.query);
          if (args.explain) slots[i].explain = explain_json(r);
          if (r.bundle.empty()) {
            slots[i].rag = Answer{"", AnswerMode::kRag, c.qid, 0.0, "NoContext"};
          } else {
            slots[i].rag = generate(build_prompt(c.query, r.bundle, tpl, AnswerMode::kRag, stamped), *generator, c.qid,
                                    AnswerMode::kRag);
          }
        }
        if (want_base) {
          slots[i].base = generate(build_prompt(c.query, base_ctx->bundle, tpl, AnswerMode::kBaseline, stamped),
                                   *generator, c.qid, AnswerMode::kBaseline);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(cfg.query_concurrency, cases.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  std::vector<Answer> answers;
  std::size_t no_context = 0;
  for (auto& s : slots) {
    if (s.rag) {
      no_context += s.rag->error.empty() ? 0 : 1;
      answers.push_back(std::move(*s.rag));
    }
    if (s.base) answers.push_back(std::move(*s.base));
  }
  write_answers_jsonl(cfg.artifact_dir / "answers.jsonl", answers);

  // Stale optional outputs of an earlier query run must not survive.
  fs::remove(cfg.artifact_dir / "cases.jsonl");
  fs::remove(cfg.artifact_dir / "explain.jsonl");
  if (!cases_path.empty()) write_cases_jsonl(cfg.artifact_dir / "cases.jsonl", cases);
  if (args.explain && want_rag) {
    std::ofstream out(cfg.artifact_dir / "explain.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& s : slots) out << s.explain << '\n';
    if (!out) throw io_error("cannot write explain.jsonl");
  }
  rec.outputs = hashes(cfg.artifact_dir, {"answers.jsonl", "cases.jsonl", "explain.jsonl"});
  rec.summary = {{"queries", cases.size()}, {"answers", answers.size()}, {"mode", args.mode}, {"no_context", no_context}};
  if (base_ctx) rec.summary["baseline_dropped"] = base_ctx->dropped;
  if (!args.query.empty()) {
    ojson texts = ojson::array();
    for (const auto& a : answers) texts.push_back({{"mode", to_string(a.mode)}, {"text", a.text}});
    rec.summary["answers_text"] = texts;
  }
  return rec;
}

ojson report_summary(const Report& report) {
  ojson s = ojson::parse(report_json(report));
  s.erase("per_case");
  return s;
}

StageRecord do_eval(const PipelineConfig& cfg, const Manifest& m, const StageArgs& args) {
  StageRecord rec;
  if (!args.scores.empty()) {
    rec.inputs["scores"] = sha256_file(args.scores);
    const Report report = build_report(read_scores_csv(args.scores));
    std::ofstream out(cfg.artifact_dir / "report.json", std::ios::binary | std::ios::trunc);
    out << report_json(report) << '\n';
    if (!out) throw io_error("cannot write report.json");
    rec.outputs = hashes(cfg.artifact_dir, {"report.json"});
    rec.summary = report_summary(report);
    return rec;
  }
  m.require("answers.jsonl");
  const ojson* q = m.entry(Stage::kQuery);
  if (!q->at("outputs").contains("cases.jsonl")) {
    throw data_error("NoCases", "the last query run had no cases file; run query --cases PATH --mode both");
  }
  m.require("cases.jsonl");
  rec.inputs = hashes(cfg.artifact_dir, {"answers.jsonl", "cases.jsonl"});
  const auto cases = read_cases_jsonl(cfg.artifact_dir / "cases.jsonl");
  const auto answers = read_answers_jsonl(cfg.artifact_dir / "answers.jsonl");
  std::vector<Answer> rag, base;
  for (const auto& a : answers) (a.mode == AnswerMode::kRag ? rag : base).push_back(a);
  const auto encoder = make_encoder(cfg);
  const Report report = compare_runs(cases, rag, base, *encoder, cfg.query_concurrency);
  {
    std::ofstream out(cfg.artifact_dir / "report.json", std::ios::binary | std::ios::trunc);
    out << report_json(report) << '\n';
    if (!out) throw io_error("cannot write report.json");
  }
  write_scores_csv(cfg.artifact_dir / "scores.csv", report);
  rec.outputs = hashes(cfg.artifact_dir, {"report.json", "scores.csv"});
  rec.summary = report_summary(report);
  return rec;
}

}  // namespace

// ---- config ------------------------------------------------------------

ojson default_config_json() {
  const RetrievalConfig r;
  const WalkConfig w;
  const TrainConfig t;
  return {
      {"corpus", {{"path", nullptr}, {"text_column", "text"}, {"date_column", "date"}, {"contractions", nullptr}}},
      {"artifact_dir", "artifacts"},
      {"cases", nullptr},
      {"seed", 1},
      {"extractor",
       {{"kind", "rule"}, {"lexicon", nullptr}, {"concurrency", 1}, {"skip_errors", false},
        {"endpoint", endpoint_json("gpt-3.5-turbo")}}},
      {"encoder", {{"kind", "local"}, {"dim", 256}, {"seed", 0x6b67}, {"endpoint", endpoint_json("text-embedding-3-small")}}},
      {"walk",
       {{"walks_per_node", w.walks_per_node}, {"walk_length", w.walk_length}, {"p", w.p}, {"q", w.q},
        {"temporal", w.temporal}, {"seed", nullptr}, {"workers", 1}}},
      {"train",
       {{"dim", t.dim}, {"window", t.window}, {"negatives", t.negatives}, {"epochs", t.epochs},
        {"initial_lr", t.initial_lr}, {"seed", nullptr}, {"workers", t.workers}}},
      {"retrieval",
       {{"k_contextual", r.k_contextual}, {"sim_threshold", r.sim_threshold},
        {"max_context_sentences", r.max_context_sentences}, {"temporal_order", r.temporal_order}}},
      {"generator",
       {{"kind", "mock-echo"}, {"fixed_text", ""}, {"temperature", 0.0}, {"concurrency", 1}, {"system", nullptr},
        {"layout", nullptr}, {"endpoint", endpoint_json("gpt-3.5-turbo")}}},
      {"baseline", {{"char_budget", 60000}}},
  };
}

PipelineConfig config_from_json(const ojson& user, const fs::path& base_dir, const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  cfg.doc = default_config_json();
  if (!user.is_null()) merge_into(cfg.doc, user, "");
  for (const auto& o : overrides) apply_override(cfg.doc, o);
  const ojson& d = cfg.doc;

  cfg.corpus_path = optional_path(d, "corpus.path", base_dir);
  cfg.text_column = field<std::string>(d, "corpus.text_column");
  cfg.date_column = field<std::string>(d, "corpus.date_column");
  cfg.contractions = optional_path(d, "corpus.contractions", base_dir);
  cfg.artifact_dir = optional_path(d, "artifact_dir", base_dir);
  if (cfg.artifact_dir.empty()) throw config_error("artifact_dir", "is required");
  cfg.cases = optional_path(d, "cases", base_dir);
  cfg.seed = field<std::uint64_t>(d, "seed");

  cfg.extractor_kind = field<std::string>(d, "extractor.kind");
  require_one_of(cfg.extractor_kind, {"rule", "remote"}, "extractor.kind");
  cfg.lexicon = optional_path(d, "extractor.lexicon", base_dir);
  cfg.extract_concurrency = positive_size(d, "extractor.concurrency");
  cfg.skip_extraction_errors = field<bool>(d, "extractor.skip_errors");
  cfg.extractor_endpoint = endpoint_from(d, "extractor");

  cfg.encoder_kind = field<std::string>(d, "encoder.kind");
  require_one_of(cfg.encoder_kind, {"local", "remote"}, "encoder.kind");
  cfg.encoder_dim = positive_size(d, "encoder.dim");
  if (cfg.encoder_dim < 8) throw config_error("encoder.dim", "must be >= 8");
  cfg.encoder_seed = field<std::uint64_t>(d, "encoder.seed");
  cfg.encoder_endpoint = endpoint_from(d, "encoder");

  cfg.walk.walks_per_node = field<int>(d, "walk.walks_per_node");
  cfg.walk.walk_length = field<int>(d, "walk.walk_length");
  cfg.walk.p = field<double>(d, "walk.p");
  cfg.walk.q = field<double>(d, "walk.q");
  cfg.walk.temporal = field<bool>(d, "walk.temporal");
  cfg.walk.seed = is_null(d, "walk", "seed") ? derive_seed(cfg.seed, 0x77616c6b) : field<std::uint64_t>(d, "walk.seed");
  positive_size(d, "walk.workers");
  cfg.walk.validate();

  cfg.train.dim = field<int>(d, "train.dim");
  cfg.train.window = field<int>(d, "train.window");
  cfg.train.negatives = field<int>(d, "train.negatives");
  cfg.train.epochs = field<int>(d, "train.epochs");
  cfg.train.initial_lr = field<double>(d, "train.initial_lr");
  cfg.train.seed = is_null(d, "train", "seed") ? derive_seed(cfg.seed, 0x747261696e) : field<std::uint64_t>(d, "train.seed");
  cfg.train.workers = field<int>(d, "train.workers");
  cfg.train.validate();

  cfg.retrieval.k_contextual = field<int>(d, "retrieval.k_contextual");
  cfg.retrieval.sim_threshold = field<double>(d, "retrieval.sim_threshold");
  cfg.retrieval.max_context_sentences = field<int>(d, "retrieval.max_context_sentences");
  cfg.retrieval.temporal_order = field<bool>(d, "retrieval.temporal_order");
  cfg.retrieval.validate();

  cfg.generator_kind = field<std::string>(d, "generator.kind");
  require_one_of(cfg.generator_kind, {"remote", "mock-echo", "mock-fixed"}, "generator.kind");
  cfg.generator_fixed_text = field<std::string>(d, "generator.fixed_text");
  if (cfg.generator_kind == "mock-fixed" && cfg.generator_fixed_text.empty()) {
    throw config_error("generator.fixed_text", "must be nonempty for mock-fixed");
  }
  cfg.temperature = field<double>(d, "generator.temperature");
  cfg.query_concurrency = positive_size(d, "generator.concurrency");
  if (!d.at("generator").at("system").is_null()) cfg.prompt_system = field<std::string>(d, "generator.system");
  if (!d.at("generator").at("layout").is_null()) cfg.prompt_layout = field<std::string>(d, "generator.layout");
  cfg.generator_endpoint = endpoint_from(d, "generator");
  if (!cfg.prompt_system.empty() || !cfg.prompt_layout.empty()) {
    PromptTemplate(cfg.prompt_system.empty() ? "x" : cfg.prompt_system,
                   cfg.prompt_layout.empty() ? PromptTemplate::standard().layout() : cfg.prompt_layout);
  }

  cfg.char_budget = positive_size(d, "baseline.char_budget");
  return cfg;
}

PipelineConfig load_config(const fs::path& file, const std::vector<std::string>& overrides) {
  ojson user;
  fs::path base = fs::current_path();
  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw io_error("cannot open config " + file.string());
    try {
      user = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw config_error(file.string(), std::string("not valid JSON: ") + e.what());
    }
    base = fs::absolute(file).parent_path();
  }
  return config_from_json(user, base, overrides);
}

// ---- hashing -----------------------------------------------------------

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }

  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, digest, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[digest[i] >> 4];
      out += kHex[digest[i] & 0xf];
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

// ---- stages ------------------------------------------------------------

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kExtract: return "extract";
    case Stage::kBuild: return "build";
    case Stage::kEmbed: return "embed";
    case Stage::kIndex: return "index";
    case Stage::kQuery: return "query";
    case Stage::kEval: return "eval";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  throw Error(ErrorKind::kUsage, "Usage", "unknown stage '" + std::string(name) + "'");
}

ojson run_stage(Stage stage, const PipelineConfig& cfg, const StageArgs& args) {
  std::error_code ec;
  fs::create_directories(cfg.artifact_dir, ec);
  if (ec || !fs::is_directory(cfg.artifact_dir)) throw io_error("cannot create artifact dir " + cfg.artifact_dir.string());
  Manifest manifest(cfg.artifact_dir);

  const auto start = std::chrono::steady_clock::now();
  StageRecord rec;
  switch (stage) {
    case Stage::kIngest: rec = do_ingest(cfg); break;
    case Stage::kExtract: rec = do_extract(cfg, manifest); break;
    case Stage::kBuild: rec = do_build(cfg, manifest); break;
    case Stage::kEmbed: rec = do_embed(cfg, manifest); break;
    case Stage::kIndex: rec = do_index(cfg, manifest); break;
    case Stage::kQuery: rec = do_query(cfg, manifest, args); break;
    case Stage::kEval: rec = do_eval(cfg, manifest, args); break;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  manifest.record(stage, {{"inputs", rec.inputs},
                          {"outputs", rec.outputs},
                          {"config_sha256", config_hash(cfg)},
                          {"duration_s", elapsed.count()}});
  ojson summary = {{"stage", stage_name(stage)}};
  for (auto& [k, v] : rec.summary.items()) summary[k] = v;
  return summary;
}

ojson run_all(const PipelineConfig& cfg, const StageArgs& args) {
  ojson out = ojson::array();
  for (Stage s : {Stage::kIngest, Stage::kExtract, Stage::kBuild, Stage::kEmbed, Stage::kIndex}) {
    out.push_back(run_stage(s, cfg, args));
  }
  const bool has_cases = !args.cases.empty() || !cfg.cases.empty();
  if (!args.query.empty() || has_cases) out.push_back(run_stage(Stage::kQuery, cfg, args));
  if (args.query.empty() && has_cases && args.mode == "both") out.push_back(run_stage(Stage::kEval, cfg, args));
  return out;
}

}  // namespace causalkg
