#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "causalkg/corpus.hpp"
#include "causalkg/http.hpp"
#include "causalkg/retrieve.hpp"

namespace causalkg {

enum class AnswerMode { kRag, kBaseline };

std::string to_string(AnswerMode mode);
AnswerMode parse_answer_mode(std::string_view s);

// System preamble plus a user layout holding {context} and {query} exactly once.
class PromptTemplate {
 public:
  // Throws ConfigInvalid when a slot is missing or repeated.
  PromptTemplate(std::string system, std::string layout);

  static const PromptTemplate& standard();

  const std::string& system() const { return system_; }
  const std::string& layout() const { return layout_; }

 private:
  std::string system_;
  std::string layout_;
};

struct Prompt {
  std::string system;
  std::string user;

  std::string text() const { return system + "\n\n" + user; }
};

/// Renders one context line per sentence, prefixed "[YYYY-MM-DD HH:MM:SS] "
/// when `timestamped`, else "- ". Throws NoContext for an empty bundle in
/// rag mode.
Prompt build_prompt(const std::string& query, const ContextBundle& ctx, const PromptTemplate& tpl,
                    AnswerMode mode = AnswerMode::kRag, bool timestamped = true);

// Sentences of the context block of a rendered prompt, prefixes removed.
std::vector<std::string> context_lines(const std::string& user_prompt);

struct Answer {
  std::string text;
  AnswerMode mode = AnswerMode::kRag;
  std::string qid;
  double elapsed_s = 0.0;
  std::string error;  // set when generation was skipped, text is then empty
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string complete(const Prompt& prompt) = 0;
  // Offline generators report zero latency so artifacts stay reproducible.
  virtual bool offline() const { return false; }
};

// Echoes the prompt's context sentences joined by single spaces.
class MockEchoGenerator final : public Generator {
 public:
  std::string complete(const Prompt& prompt) override;
  bool offline() const override { return true; }
};

class MockFixedGenerator final : public Generator {
 public:
  explicit MockFixedGenerator(std::string text) : text_(std::move(text)) {}
  std::string complete(const Prompt&) override { return text_; }
  bool offline() const override { return true; }

 private:
  std::string text_;
};

// One chat-completions call per prompt.
class RemoteGenerator final : public Generator {
 public:
  RemoteGenerator(std::shared_ptr<HttpTransport> http, RemoteEndpoint endpoint, double temperature = 0.0);
  std::string complete(const Prompt& prompt) override;

 private:
  std::shared_ptr<HttpTransport> http_;
  RemoteEndpoint endpoint_;
  double temperature_;
};

// Throws whatever the generator throws; an empty completion is reported as
// UnparseableResponse.
Answer generate(const Prompt& prompt, Generator& generator, std::string qid = {},
                AnswerMode mode = AnswerMode::kRag);

struct BaselineContext {
  ContextBundle bundle;
  std::size_t dropped = 0;  // latest tweets cut by the budget
};

// Whole corpus in (timestamp, id) order, cut to `char_budget` bytes of
// sentence text by dropping the latest tweets. Throws EmptyCorpus, or
// EmptyBudget if the first tweet does not fit.
BaselineContext baseline_context(const TweetStore& corpus, std::size_t char_budget);

void write_answers_jsonl(const std::filesystem::path& path, std::span<const Answer> answers);
std::vector<Answer> read_answers_jsonl(const std::filesystem::path& path);

}  // namespace causalkg
