#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace causalkg {

using TweetId = std::uint64_t;
using Timestamp = std::int64_t;  // UTC epoch seconds

struct RawRecord {
  std::string text;
  std::string date;
  std::map<std::string, std::string> extra;
};

struct Tweet {
  TweetId id = 0;
  std::string text;
  Timestamp timestamp = 0;

  bool operator==(const Tweet&) const = default;
};

// RFC-4180 reader. Quoted fields may contain separators, doubled quotes and
// line breaks.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads one record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  // 1-based physical line on which the last returned record started.
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

// Streams RawRecords from a CSV with a header row.
class CorpusReader {
 public:
  // Throws MissingColumn if either named column is absent from the header.
  CorpusReader(std::istream& in, std::string_view text_column, std::string_view date_column);

  std::optional<RawRecord> next();

  // Line numbers of data rows skipped because of a wrong field count.
  const std::vector<std::size_t>& malformed_lines() const { return malformed_; }

 private:
  CsvReader csv_;
  std::vector<std::string> header_;
  std::size_t text_index_ = 0;
  std::size_t date_index_ = 0;
  std::vector<std::size_t> malformed_;
};

struct LoadResult {
  std::vector<RawRecord> records;
  std::vector<std::size_t> malformed_lines;
};

LoadResult load_corpus(const std::filesystem::path& path, std::string_view text_column,
                       std::string_view date_column);

/// Contraction -> expansion map with case-insensitive lookup.
///
/// Values listing alternatives separated by "/" ("are not / am not") resolve to
/// the first alternative.
class ContractionDictionary {
 public:
  ContractionDictionary() = default;
  explicit ContractionDictionary(const std::map<std::string, std::string>& entries);

  static ContractionDictionary from_json_text(std::string_view json);
  static ContractionDictionary from_file(const std::filesystem::path& path);
  // The dictionary shipped in data/contractions.json, compiled in.
  static const ContractionDictionary& builtin();

  std::optional<std::string_view> lookup(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> entries_;  // lowercase key -> first alternative
};

std::string expand_contractions(std::string_view text, const ContractionDictionary& dict);

// Ordered cleaning: HTML tags, URLs, hashtag tokens, emoji, other special
// characters, lowercase, whitespace collapse. Idempotent.
std::string clean_text(std::string_view text);

// "YYYY-MM-DD[( |T)HH:MM:SS][±HH:MM|Z]" -> UTC epoch seconds. Throws
// UnparseableDate.
Timestamp normalize_timestamp(std::string_view raw);

// Epoch seconds -> "YYYY-MM-DD HH:MM:SS" (UTC).
std::string format_timestamp(Timestamp ts);

std::string preprocess_text(std::string_view raw_text, const ContractionDictionary& dict);

struct IngestResult {
  std::vector<Tweet> tweets;
  std::vector<std::size_t> malformed_lines;
  std::size_t bad_dates = 0;
  std::size_t empty_texts = 0;
};

// load_corpus + expand/clean + timestamp normalization. Tweet ids are the
// 0-based index of the record in file order, so skipped records leave gaps.
IngestResult ingest(const std::filesystem::path& path, std::string_view text_column,
                    std::string_view date_column, const ContractionDictionary& dict);

// Id-sorted tweet lookup.
class TweetStore {
 public:
  TweetStore() = default;
  explicit TweetStore(std::vector<Tweet> tweets);

  const Tweet* find(TweetId id) const;
  std::span<const Tweet> all() const { return tweets_; }
  std::size_t size() const { return tweets_.size(); }
  bool empty() const { return tweets_.empty(); }

 private:
  std::vector<Tweet> tweets_;
};

void write_tweets_jsonl(const std::filesystem::path& path, std::span<const Tweet> tweets);
std::vector<Tweet> read_tweets_jsonl(const std::filesystem::path& path);

}  // namespace causalkg
