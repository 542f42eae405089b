#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalkg/http.hpp"
#include "causalkg/n2v.hpp"
#include "causalkg/retrieve.hpp"

namespace causalkg {

struct PipelineConfig {
  // Effective configuration after defaults and overrides; the source of
  // every field below and of the config hash.
  nlohmann::ordered_json doc;

  std::filesystem::path corpus_path;
  std::string text_column = "text";
  std::string date_column = "date";
  std::filesystem::path contractions;  // empty: builtin dictionary
  std::filesystem::path artifact_dir;
  std::filesystem::path cases;         // empty: none configured

  std::string extractor_kind = "rule";  // rule | remote
  std::filesystem::path lexicon;        // empty: builtin lexicon
  RemoteEndpoint extractor_endpoint;
  std::size_t extract_concurrency = 1;
  bool skip_extraction_errors = false;

  std::string encoder_kind = "local";  // local | remote
  std::size_t encoder_dim = 256;
  std::uint64_t encoder_seed = 0x6b67;
  RemoteEndpoint encoder_endpoint;

  WalkConfig walk;
  TrainConfig train;
  RetrievalConfig retrieval;

  std::string generator_kind = "mock-echo";  // remote | mock-echo | mock-fixed
  std::string generator_fixed_text;
  RemoteEndpoint generator_endpoint;
  double temperature = 0.0;
  std::string prompt_system;  // empty: standard template
  std::string prompt_layout;
  std::size_t query_concurrency = 1;

  std::size_t char_budget = 60000;
  std::uint64_t seed = 1;
};

// Defaults for every field except corpus.path.
nlohmann::ordered_json default_config_json();

/// Defaults, deep-merged with `file` (if nonempty), then dotted-path
/// `overrides` ("walk.p=0.5"; values parse as JSON, else as strings).
///
/// Relative paths in the file resolve against the file's directory; unknown
/// keys and invalid values throw ConfigInvalid. walk.seed and train.seed
/// default to values derived from the global seed.
PipelineConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});
PipelineConfig config_from_json(const nlohmann::ordered_json& user, const std::filesystem::path& base_dir,
                                const std::vector<std::string>& overrides = {});

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

enum class Stage { kIngest, kExtract, kBuild, kEmbed, kIndex, kQuery, kEval };
inline constexpr Stage kAllStages[] = {Stage::kIngest, Stage::kExtract, Stage::kBuild, Stage::kEmbed,
                                       Stage::kIndex,  Stage::kQuery,   Stage::kEval};
std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);

struct StageArgs {
  std::string query;             // single ad-hoc query, qid "q1"
  std::filesystem::path cases;   // cases.jsonl; overrides the configured one
  std::string mode = "both";     // rag | baseline | both
  bool explain = false;          // also write explain.jsonl
  std::filesystem::path scores;  // eval: summarize this scores.csv directly
};

/// Runs one stage inside cfg.artifact_dir and records it in manifest.json.
///
/// Each artifact a stage reads must have been produced by the stage that
/// owns it (else MissingPrerequisite) and must still hash to the value in
/// that stage's manifest entry (else StaleArtifact). Returns a small
/// machine-readable summary.
nlohmann::ordered_json run_stage(Stage stage, const PipelineConfig& cfg, const StageArgs& args = {});

// Every stage in order; query and eval only when a query or cases are
// available.
nlohmann::ordered_json run_all(const PipelineConfig& cfg, const StageArgs& args = {});

}  // namespace causalkg
