#include "causalkg/generate.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "causalkg/error.hpp"

namespace causalkg {

namespace {

constexpr std::string_view kContextSlot = "{context}";
constexpr std::string_view kQuerySlot = "{query}";

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// "[YYYY-MM-DD HH:MM:SS] " is 22 bytes.
bool has_timestamp_prefix(std::string_view line) {
  if (line.size() < 22 || line[0] != '[' || line[20] != ']' || line[21] != ' ') return false;
  static constexpr std::string_view kShape = "dddd-dd-dd dd:dd:dd";
  for (std::size_t i = 0; i < kShape.size(); ++i) {
    const char c = line[i + 1];
    if (kShape[i] == 'd' ? !is_digit(c) : c != kShape[i]) return false;
  }
  return true;
}

}  // namespace

std::string to_string(AnswerMode mode) { return mode == AnswerMode::kRag ? "rag" : "baseline"; }

AnswerMode parse_answer_mode(std::string_view s) {
  if (s == "rag") return AnswerMode::kRag;
  if (s == "baseline") return AnswerMode::kBaseline;
  throw config_error("mode", "expected rag or baseline, got '" + std::string(s) + "'");
}

PromptTemplate::PromptTemplate(std::string system, std::string layout)
    : system_(std::move(system)), layout_(std::move(layout)) {
  if (count_occurrences(layout_, kContextSlot) != 1) {
    throw config_error("prompt.layout", "must contain {context} exactly once");
  }
  if (count_occurrences(layout_, kQuerySlot) != 1) {
    throw config_error("prompt.layout", "must contain {query} exactly once");
  }
}

const PromptTemplate& PromptTemplate::standard() {
  static const PromptTemplate tpl(
      "You are an analyst who infers causes from social media posts. Use only the posts you are given.",
      "Context:\n{context}\n\nBased only on the context above, explain what caused: {query}\n"
      "State the cause(s) in one or two sentences.");
  return tpl;
}

Prompt build_prompt(const std::string& query, const ContextBundle& ctx, const PromptTemplate& tpl, AnswerMode mode,
                    bool timestamped) {
  if (mode == AnswerMode::kRag && ctx.sentences.empty()) {
    throw data_error("NoContext", "no context retrieved for: " + query);
  }
  std::string block;
  for (const auto& s : ctx.sentences) {
    if (!block.empty()) block += '\n';
    block += timestamped ? "[" + format_timestamp(s.timestamp) + "] " : "- ";
    block += s.text;
  }
  // Substitute both slots in one pass so slot text inside the query or the
  // context is never expanded.
  const std::string& layout = tpl.layout();
  const auto ctx_pos = layout.find(kContextSlot);
  const auto query_pos = layout.find(kQuerySlot);
  std::string user;
  if (ctx_pos < query_pos) {
    user = layout.substr(0, ctx_pos) + block + layout.substr(ctx_pos + kContextSlot.size(), query_pos - ctx_pos - kContextSlot.size()) +
           query + layout.substr(query_pos + kQuerySlot.size());
  } else {
    user = layout.substr(0, query_pos) + query + layout.substr(query_pos + kQuerySlot.size(), ctx_pos - query_pos - kQuerySlot.size()) +
           block + layout.substr(ctx_pos + kContextSlot.size());
  }
  return Prompt{tpl.system(), std::move(user)};
}

std::vector<std::string> context_lines(const std::string& user_prompt) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < user_prompt.size()) {
    auto end = user_prompt.find('\n', pos);
    if (end == std::string::npos) end = user_prompt.size();
    std::string_view line(user_prompt.data() + pos, end - pos);
    if (has_timestamp_prefix(line)) {
      out.emplace_back(line.substr(22));
    } else if (line.starts_with("- ")) {
      out.emplace_back(line.substr(2));
    }
    pos = end + 1;
  }
  return out;
}

std::string MockEchoGenerator::complete(const Prompt& prompt) {
  const auto lines = context_lines(prompt.user);
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += ' ';
    out += l;
  }
  return out;
}

RemoteGenerator::RemoteGenerator(std::shared_ptr<HttpTransport> http, RemoteEndpoint endpoint, double temperature)
    : http_(std::move(http)), endpoint_(std::move(endpoint)), temperature_(temperature) {
  if (!(endpoint_.timeout_s > 0.0)) throw config_error("generator.timeout_s", "must be > 0");
}

std::string RemoteGenerator::complete(const Prompt& prompt) {
  return chat_completion(*http_, endpoint_, {{"system", prompt.system}, {"user", prompt.user}}, temperature_);
}

Answer generate(const Prompt& prompt, Generator& generator, std::string qid, AnswerMode mode) {
  const auto start = std::chrono::steady_clock::now();
  std::string text = generator.complete(prompt);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  if (text.empty()) throw RemoteError(RemoteError::Reason::kUnparseableResponse, "generator returned an empty answer");
  return Answer{std::move(text), mode, std::move(qid), generator.offline() ? 0.0 : elapsed.count(), {}};
}

BaselineContext baseline_context(const TweetStore& corpus, std::size_t char_budget) {
  if (corpus.empty()) throw data_error("EmptyCorpus", "baseline needs at least one tweet");
  std::vector<const Tweet*> order;
  for (const auto& t : corpus.all()) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Tweet* a, const Tweet* b) {
    return std::tie(a->timestamp, a->id) < std::tie(b->timestamp, b->id);
  });
  BaselineContext out;
  std::size_t used = 0;
  std::size_t kept = 0;
  for (const Tweet* t : order) {
    if (used + t->text.size() > char_budget) break;
    used += t->text.size();
    out.bundle.sentences.push_back({t->timestamp, t->id, t->text});
    ++kept;
  }
  if (kept == 0) {
    throw data_error("EmptyBudget", "first tweet (" + std::to_string(order.front()->text.size()) +
                                        " bytes) exceeds char_budget " + std::to_string(char_budget));
  }
  out.dropped = order.size() - kept;
  if (out.dropped > 0) {
    std::cerr << "warning: baseline context dropped the " << out.dropped << " latest tweets to fit " << char_budget
              << " bytes\n";
  }
  return out;
}

void write_answers_jsonl(const std::filesystem::path& path, std::span<const Answer> answers) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  for (const auto& a : answers) {
    nlohmann::ordered_json line = {{"qid", a.qid}, {"mode", to_string(a.mode)}, {"text", a.text}, {"elapsed_s", a.elapsed_s}};
    if (!a.error.empty()) line["error"] = a.error;
    out << line.dump() << '\n';
  }
  if (!out) throw io_error("write failed: " + path.string());
}

std::vector<Answer> read_answers_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<Answer> answers;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Answer a;
      a.qid = j.at("qid").get<std::string>();
      a.mode = parse_answer_mode(j.at("mode").get<std::string>());
      a.text = j.at("text").get<std::string>();
      a.elapsed_s = j.value("elapsed_s", 0.0);
      a.error = j.value("error", std::string());
      answers.push_back(std::move(a));
    } catch (const std::exception&) {
      throw data_error("CorruptFile", path.string() + ":" + std::to_string(lineno));
    }
  }
  return answers;
}

}  // namespace causalkg
