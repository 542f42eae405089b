#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalkg/corpus.hpp"
#include "causalkg/http.hpp"

namespace causalkg {

// (subject, relation, object) with provenance. Fields are normalized and
// nonempty; construct through make().
struct Triple {
  std::string subject;
  std::string relation;
  std::string object;
  TweetId source = 0;
  Timestamp timestamp = 0;

  // Normalizes the three fields; throws InvalidTriple if any ends up empty.
  static Triple make(std::string_view subject, std::string_view relation, std::string_view object,
                     TweetId source = 0, Timestamp timestamp = 0);

  bool operator==(const Triple&) const = default;
};

struct RelationPattern {
  std::string phrase;    // matched against whole tokens
  std::string relation;  // emitted relation label
  bool inverted = false; // "x phrase y" yields (y, relation, x)
};

class RelationLexicon {
 public:
  explicit RelationLexicon(std::vector<RelationPattern> patterns);

  // One phrase per line; "#" comments; "phrase <= relation" marks an inverted
  // connective.
  static RelationLexicon parse(std::string_view text);
  static RelationLexicon from_file(const std::filesystem::path& path);
  static const RelationLexicon& builtin();

  // Longest phrases first.
  const std::vector<RelationPattern>& patterns() const { return patterns_; }

 private:
  std::vector<RelationPattern> patterns_;
  std::vector<std::vector<std::string>> tokens_;
  friend std::vector<Triple> rule_extract(std::string_view, const RelationLexicon&);
};

inline constexpr std::size_t kMaxTriplesPerSentence = 4;

// Leftmost-longest lexicon matching; each match emits (text since previous
// match, relation, text up to next match). Source and timestamp are left 0.
std::vector<Triple> rule_extract(std::string_view sentence, const RelationLexicon& lexicon);

struct RemoteExtraction {
  std::vector<Triple> triples;
  std::size_t dropped = 0;  // malformed entries in an otherwise valid array
};

// One chat-completion call asking for a JSON array of {"s","r","o"}.
RemoteExtraction remote_extract(std::string_view sentence, HttpTransport& http, const RemoteEndpoint& endpoint);

// Parses a model reply (optionally wrapped in a ``` fence) into triples.
RemoteExtraction parse_extraction_reply(std::string_view reply);

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual std::vector<Triple> extract(std::string_view sentence) = 0;
};

class RuleExtractor final : public Extractor {
 public:
  explicit RuleExtractor(RelationLexicon lexicon = RelationLexicon::builtin()) : lexicon_(std::move(lexicon)) {}
  std::vector<Triple> extract(std::string_view sentence) override { return rule_extract(sentence, lexicon_); }

 private:
  RelationLexicon lexicon_;
};

class RemoteExtractor final : public Extractor {
 public:
  RemoteExtractor(std::shared_ptr<HttpTransport> http, RemoteEndpoint endpoint)
      : http_(std::move(http)), endpoint_(std::move(endpoint)) {}

  std::vector<Triple> extract(std::string_view sentence) override;
  std::size_t dropped() const { return dropped_.load(); }

 private:
  std::shared_ptr<HttpTransport> http_;
  RemoteEndpoint endpoint_;
  std::atomic<std::size_t> dropped_{0};
};

struct ExtractOptions {
  std::size_t concurrency = 1;
  bool skip_errors = false;  // log and skip tweets whose extraction throws
};

struct ExtractionRun {
  std::vector<Triple> triples;  // tweet-id order, then extraction order
  std::size_t failed_tweets = 0;
};

// Runs the extractor over every tweet (up to `concurrency` in flight) and
// stamps each triple with its tweet's id and timestamp.
ExtractionRun extract_corpus(std::span<const Tweet> tweets, Extractor& extractor, const ExtractOptions& options = {});

void write_triples_jsonl(const std::filesystem::path& path, std::span<const Triple> triples);
std::vector<Triple> read_triples_jsonl(const std::filesystem::path& path);

}  // namespace causalkg
