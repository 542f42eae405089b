// causalkg: stage-by-stage driver for the temporal knowledge-graph RAG pipeline.
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 io, 4 remote service, 5 data.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "causalkg/error.hpp"
#include "causalkg/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool mock_llm = false;
  std::optional<int> k;
  std::optional<double> threshold;
  std::optional<bool> temporal;
  causalkg::StageArgs stage;
};

std::vector<std::string> overrides(const Options& o) {
  std::vector<std::string> out = o.sets;
  if (o.seed) out.push_back("seed=" + std::to_string(*o.seed));
  if (o.mock_llm) {
    out.insert(out.end(), {"extractor.kind=rule", "encoder.kind=local", "generator.kind=mock-echo"});
  }
  if (o.k) out.push_back("retrieval.k_contextual=" + std::to_string(*o.k));
  if (o.threshold) {
    nlohmann::json v = *o.threshold;
    out.push_back("retrieval.sim_threshold=" + v.dump());
  }
  if (o.temporal) {
    const std::string v = *o.temporal ? "true" : "false";
    out.push_back("walk.temporal=" + v);
    out.push_back("retrieval.temporal_order=" + v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal knowledge-graph retrieval for causal questions over timestamped short texts"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON pipeline config")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", o.sets, "Override a config field, e.g. walk.p=0.5 (repeatable)");
    cmd->add_option("--seed", o.seed, "Global seed");
    cmd->add_flag("--mock-llm", o.mock_llm, "Use the rule extractor, local encoder and mock-echo generator");
    cmd->add_option("--k", o.k, "Triples kept per query (retrieval.k_contextual)");
    cmd->add_option("--threshold", o.threshold, "Cosine threshold (retrieval.sim_threshold)");
    cmd->add_option("--temporal", o.temporal, "Temporal walks and chronological context (true|false)");
  };
  auto add_query = [&](CLI::App* cmd) {
    cmd->add_option("--mode", o.stage.mode, "rag, baseline or both")
        ->check(CLI::IsMember({"rag", "baseline", "both"}));
    auto* q = cmd->add_option("--query", o.stage.query, "Single question");
    cmd->add_option("--cases", o.stage.cases, "cases.jsonl with {qid, query, truth}")
        ->check(CLI::ExistingFile)
        ->excludes(q);
    cmd->add_flag("--explain", o.stage.explain, "Write explain.jsonl with seeds and context per query");
  };

  std::vector<std::pair<CLI::App*, std::optional<causalkg::Stage>>> commands;
  for (auto [name, help] : std::initializer_list<std::pair<const char*, const char*>>{
           {"ingest", "Read and clean the corpus CSV into tweets.jsonl"},
           {"extract", "Extract causal triples into triples.jsonl"},
           {"build", "Merge triples into the temporal graph (nodes.jsonl, edges.jsonl)"},
           {"embed", "Train node embeddings (embeddings.json)"},
           {"index", "Encode every edge into triple_index.json"},
           {"query", "Answer a query or a cases file (answers.jsonl)"},
           {"eval", "Score answers against ground truth (report.json, scores.csv)"}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd);
    commands.emplace_back(cmd, causalkg::parse_stage(name));
    if (std::string(name) == "query") add_query(cmd);
    if (std::string(name) == "eval") {
      cmd->add_option("--scores", o.stage.scores, "Summarize an existing scores.csv instead of answers")
          ->check(CLI::ExistingFile);
    }
  }
  auto* run = app.add_subcommand("run", "Run every stage in order; query and eval when a query or cases are given");
  add_common(run);
  add_query(run);
  commands.emplace_back(run, std::nullopt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = causalkg::load_config(o.config, overrides(o));
    for (const auto& [cmd, stage] : commands) {
      if (!cmd->parsed()) continue;
      const auto summary = stage ? causalkg::run_stage(*stage, cfg, o.stage) : causalkg::run_all(cfg, o.stage);
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const causalkg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(causalkg::ErrorKind::kIo);
  }
  return 0;
}
