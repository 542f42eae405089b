#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalkg/encode.hpp"
#include "causalkg/generate.hpp"

namespace causalkg {

struct EvalCase {
  std::string qid;
  std::string query;
  std::string truth;
};

// cases.jsonl: {"qid","query","truth"}, all nonempty, qids unique.
std::vector<EvalCase> read_cases_jsonl(const std::filesystem::path& path);
void write_cases_jsonl(const std::filesystem::path& path, std::span<const EvalCase> cases);

// clean_text, then whitespace split.
std::vector<std::string> metric_tokens(std::string_view text);

/// Sentence BLEU over metric_tokens.
///
/// Orders 1..min(4, candidate length) with uniform weights. Orders >= 2 use
/// (matches + 1) / (total + 1); a zero unigram precision gives 0. Brevity
/// penalty exp(min(0, 1 - ref_len / cand_len)). Throws EmptyInput.
double bleu(std::string_view candidate, std::string_view reference);

// |A ∩ B| / |A ∪ B| over metric_tokens sets. Throws EmptyInput.
double jaccard(std::string_view candidate, std::string_view reference);

double encoding_similarity(std::string_view candidate, std::string_view reference, const Encoder& enc);

enum class Metric { kBleu = 0, kJaccard = 1, kCosine = 2 };
inline constexpr std::array<Metric, 3> kMetrics = {Metric::kBleu, Metric::kJaccard, Metric::kCosine};
std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

struct MetricTriple {
  double bleu = 0.0;
  double jaccard = 0.0;
  double cosine = 0.0;

  double get(Metric m) const;
  double mean() const { return (bleu + jaccard + cosine) / 3.0; }
};

// All three metrics against `truth`; an empty or unscorable candidate
// scores 0 on each.
MetricTriple score_answer(std::string_view candidate, std::string_view truth, const Encoder& enc);

// Greater MetricTriple mean wins; ties go to the rag answer.
const Answer& select_best(const Answer& rag, const Answer& baseline, std::string_view truth, const Encoder& enc);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;  // quartiles by linear interpolation between order statistics
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Throws EmptyInput for no values.
Summary summarize(std::span<const double> values);

struct CaseScores {
  std::string qid;
  MetricTriple rag;
  MetricTriple baseline;
  AnswerMode best = AnswerMode::kRag;
};

struct Report {
  std::vector<CaseScores> cases;
  std::array<Summary, 3> rag;       // indexed by Metric
  std::array<Summary, 3> baseline;
  // 100 * (rag mean - baseline mean) / baseline mean; empty when the
  // baseline mean is 0.
  std::array<std::optional<double>, 3> improvement_pct;
  // Mean of the defined per-metric improvements.
  std::optional<double> average_improvement_pct;
};

// Aggregates per-case scores. Throws EmptyInput for no cases.
Report build_report(std::vector<CaseScores> cases);

/// Scores both answer sets against the cases' truths.
///
/// Each case needs exactly one rag and one baseline answer with its qid,
/// and no answer may reference an unknown qid; otherwise MisalignedAnswers.
/// Output cases follow the order of `cases`.
Report compare_runs(std::span<const EvalCase> cases, std::span<const Answer> rag, std::span<const Answer> baseline,
                    const Encoder& enc, std::size_t concurrency = 1);

// scores.csv: header "qid,mode,metric,value", rows in case order, rag before
// baseline, metrics in bleu/jaccard/cosine order.
void write_scores_csv(const std::filesystem::path& path, const Report& report);
// Rebuilds per-case scores from a scores.csv. Every qid must carry all six
// (mode, metric) values exactly once.
std::vector<CaseScores> read_scores_csv(const std::filesystem::path& path);

std::string report_json(const Report& report);

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace causalkg
