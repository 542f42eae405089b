#include "causalkg/extraction.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "builtin_data.hpp"
#include "causalkg/error.hpp"
#include "causalkg/text.hpp"

namespace causalkg {

namespace {

constexpr const char* kExtractionInstruction =
    "Extract the (subject, relation, object) triples stated in the tweet. "
    "Reply with only a JSON array of objects with string fields \"s\" (subject), \"r\" (relation) "
    "and \"o\" (object). Reply with [] when the tweet states no relation.";

std::string_view strip_code_fence(std::string_view s) {
  s = text::trim(s);
  if (!s.starts_with("```")) return s;
  auto first_newline = s.find('\n');
  if (first_newline == std::string_view::npos) return s;
  s.remove_prefix(first_newline + 1);
  if (auto close = s.rfind("```"); close != std::string_view::npos) s = s.substr(0, close);
  return text::trim(s);
}

}  // namespace

Triple Triple::make(std::string_view subject, std::string_view relation, std::string_view object, TweetId source,
                    Timestamp timestamp) {
  Triple t{text::normalize_phrase(subject), text::normalize_phrase(relation), text::normalize_phrase(object), source,
           timestamp};
  if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
    throw data_error("InvalidTriple", "empty field in (" + t.subject + ", " + t.relation + ", " + t.object + ")");
  }
  return t;
}

RelationLexicon::RelationLexicon(std::vector<RelationPattern> patterns) : patterns_(std::move(patterns)) {
  if (patterns_.empty()) throw config_error("lexicon", "no relation phrases");
  for (auto& p : patterns_) {
    p.phrase = text::normalize_phrase(p.phrase);
    p.relation = text::normalize_phrase(p.relation.empty() ? p.phrase : p.relation);
    if (p.phrase.empty()) throw config_error("lexicon", "empty relation phrase");
  }
  std::stable_sort(patterns_.begin(), patterns_.end(), [](const RelationPattern& a, const RelationPattern& b) {
    return text::split_whitespace(a.phrase).size() > text::split_whitespace(b.phrase).size();
  });
  for (const auto& p : patterns_) tokens_.push_back(text::split_whitespace(p.phrase));
}

RelationLexicon RelationLexicon::parse(std::string_view body) {
  std::vector<RelationPattern> patterns;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    std::string_view line = text::trim(body.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    if (auto arrow = line.find("<="); arrow != std::string_view::npos) {
      patterns.push_back({std::string(text::trim(line.substr(0, arrow))),
                          std::string(text::trim(line.substr(arrow + 2))), true});
    } else {
      patterns.push_back({std::string(line), std::string(line), false});
    }
  }
  return RelationLexicon(std::move(patterns));
}

RelationLexicon RelationLexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(body);
}

const RelationLexicon& RelationLexicon::builtin() {
  static const RelationLexicon lexicon = parse(builtin::kRelationLexicon);
  return lexicon;
}

std::vector<Triple> rule_extract(std::string_view sentence, const RelationLexicon& lexicon) {
  const auto tokens = text::split_whitespace(text::to_lower_ascii(sentence));
  struct Match {
    std::size_t begin;
    std::size_t end;
    std::size_t pattern;
  };
  std::vector<Match> matches;
  for (std::size_t i = 0; i < tokens.size();) {
    std::optional<Match> best;
    for (std::size_t p = 0; p < lexicon.tokens_.size(); ++p) {
      const auto& phrase = lexicon.tokens_[p];
      if (i + phrase.size() > tokens.size()) continue;
      if (!std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      if (!best || phrase.size() > best->end - best->begin) best = Match{i, i + phrase.size(), p};
    }
    if (best) {
      matches.push_back(*best);
      i = best->end;
    } else {
      ++i;
    }
  }

  auto span_text = [&](std::size_t b, std::size_t e) {
    std::vector<std::string> part(tokens.begin() + static_cast<std::ptrdiff_t>(b),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(e));
    return text::join(part, " ");
  };

  std::vector<Triple> out;
  for (std::size_t k = 0; k < matches.size() && out.size() < kMaxTriplesPerSentence; ++k) {
    const std::size_t left_begin = k == 0 ? 0 : matches[k - 1].end;
    const std::size_t right_end = k + 1 < matches.size() ? matches[k + 1].begin : tokens.size();
    if (left_begin >= matches[k].begin || matches[k].end >= right_end) continue;
    const auto& pattern = lexicon.patterns_[matches[k].pattern];
    std::string left = span_text(left_begin, matches[k].begin);
    std::string right = span_text(matches[k].end, right_end);
    if (pattern.inverted) std::swap(left, right);
    out.push_back(Triple::make(left, pattern.relation, right));
  }
  return out;
}

RemoteExtraction parse_extraction_reply(std::string_view reply) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(strip_code_fence(reply));
  } catch (const nlohmann::json::parse_error& e) {
    throw RemoteError(RemoteError::Reason::kUnparseableResponse, std::string("extraction reply: ") + e.what());
  }
  if (!doc.is_array()) {
    throw RemoteError(RemoteError::Reason::kUnparseableResponse, "extraction reply is not a JSON array");
  }
  RemoteExtraction result;
  for (const auto& entry : doc) {
    const bool well_formed = entry.is_object() && entry.contains("s") && entry.contains("r") &&
                             entry.contains("o") && entry["s"].is_string() && entry["r"].is_string() &&
                             entry["o"].is_string();
    if (!well_formed) {
      ++result.dropped;
      continue;
    }
    try {
      result.triples.push_back(Triple::make(entry["s"].get<std::string>(), entry["r"].get<std::string>(),
                                            entry["o"].get<std::string>()));
    } catch (const Error&) {
      ++result.dropped;
    }
  }
  return result;
}

RemoteExtraction remote_extract(std::string_view sentence, HttpTransport& http, const RemoteEndpoint& endpoint) {
  const std::vector<ChatMessage> messages = {{"system", kExtractionInstruction}, {"user", std::string(sentence)}};
  // A reply that is not a triple array is retried like a transport error.
  return post_json_with_retries(http, endpoint, "/chat/completions", chat_request_body(endpoint, messages, 0.0),
                                [](const std::string& raw) { return parse_extraction_reply(parse_chat_content(raw)); });
}

std::vector<Triple> RemoteExtractor::extract(std::string_view sentence) {
  auto result = remote_extract(sentence, *http_, endpoint_);
  if (result.dropped > 0) {
    dropped_ += result.dropped;
    std::cerr << "warning: dropped " << result.dropped << " malformed extraction entries\n";
  }
  return std::move(result.triples);
}

ExtractionRun extract_corpus(std::span<const Tweet> tweets, Extractor& extractor, const ExtractOptions& options) {
  std::vector<std::vector<Triple>> per_tweet(tweets.size());
  std::vector<std::exception_ptr> errors(tweets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < tweets.size(); i = next++) {
      try {
        per_tweet[i] = extractor.extract(tweets[i].text);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(1, tweets.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Reassemble in tweet order so the output does not depend on scheduling.
  ExtractionRun run;
  for (std::size_t i = 0; i < tweets.size(); ++i) {
    if (errors[i]) {
      if (!options.skip_errors) std::rethrow_exception(errors[i]);
      ++run.failed_tweets;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        std::cerr << "warning: extraction failed for tweet " << tweets[i].id << ": " << e.what() << '\n';
      }
      continue;
    }
    for (auto& t : per_tweet[i]) {
      t.source = tweets[i].id;
      t.timestamp = tweets[i].timestamp;
      run.triples.push_back(std::move(t));
    }
  }
  return run;
}

void write_triples_jsonl(const std::filesystem::path& path, std::span<const Triple> triples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  for (const auto& t : triples) {
    nlohmann::json line = {{"s", t.subject}, {"r", t.relation}, {"o", t.object}, {"src", t.source}, {"ts", t.timestamp}};
    out << line.dump() << '\n';
  }
  if (!out) throw io_error("write failed: " + path.string());
}

std::vector<Triple> read_triples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<Triple> triples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      triples.push_back(Triple::make(j.at("s").get<std::string>(), j.at("r").get<std::string>(),
                                     j.at("o").get<std::string>(), j.at("src").get<TweetId>(),
                                     j.at("ts").get<Timestamp>()));
    } catch (const std::exception&) {
      throw data_error("CorruptFile", path.string() + ":" + std::to_string(lineno));
    }
  }
  return triples;
}

}  // namespace causalkg
