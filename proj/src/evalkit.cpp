#include "causalkg/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "causalkg/corpus.hpp"
#include "causalkg/error.hpp"
#include "causalkg/text.hpp"

namespace causalkg {

namespace {

std::vector<std::string> nonempty_tokens(std::string_view text, const char* which) {
  auto tokens = metric_tokens(text);
  if (tokens.empty()) throw data_error("EmptyInput", std::string(which) + " has no tokens");
  return tokens;
}

using Ngram = std::vector<std::string>;

std::map<Ngram, int> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, int> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw data_error("CorruptFile", "not a number: '" + s + "'");
  return v;
}

nlohmann::ordered_json summary_json(const Summary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
          {"q3", s.q3}, {"min", s.min}, {"max", s.max}};
}

nlohmann::ordered_json triple_json(const MetricTriple& t) {
  return {{"bleu", t.bleu}, {"jaccard", t.jaccard}, {"cosine", t.cosine}};
}

}  // namespace

std::vector<EvalCase> read_cases_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<EvalCase> cases;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    EvalCase c;
    try {
      auto j = nlohmann::json::parse(line);
      c = {j.at("qid").get<std::string>(), j.at("query").get<std::string>(), j.at("truth").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
      throw data_error("CorruptFile", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (c.qid.empty() || text::trim(c.query).empty() || text::trim(c.truth).empty()) {
      throw data_error("CorruptFile", path.string() + ":" + std::to_string(lineno) + ": empty field");
    }
    if (!seen.insert(c.qid).second) {
      throw data_error("CorruptFile", path.string() + ":" + std::to_string(lineno) + ": duplicate qid " + c.qid);
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

void write_cases_jsonl(const std::filesystem::path& path, std::span<const EvalCase> cases) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  for (const auto& c : cases) {
    out << nlohmann::ordered_json{{"qid", c.qid}, {"query", c.query}, {"truth", c.truth}}.dump() << '\n';
  }
  if (!out) throw io_error("write failed: " + path.string());
}

std::vector<std::string> metric_tokens(std::string_view text) { return text::split_whitespace(clean_text(text)); }

double bleu(std::string_view candidate, std::string_view reference) {
  const auto cand = nonempty_tokens(candidate, "candidate");
  const auto ref = nonempty_tokens(reference, "reference");
  const std::size_t max_n = std::min<std::size_t>(4, cand.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto c_counts = ngram_counts(cand, n);
    const auto r_counts = ngram_counts(ref, n);
    int matches = 0;
    for (const auto& [gram, count] : c_counts) {
      auto it = r_counts.find(gram);
      if (it != r_counts.end()) matches += std::min(count, it->second);
    }
    const auto total = static_cast<double>(cand.size() - n + 1);
    if (n == 1) {
      if (matches == 0) return 0.0;
      log_sum += std::log(matches / total);
    } else {
      log_sum += std::log((matches + 1.0) / (total + 1.0));
    }
  }
  const double ratio = static_cast<double>(ref.size()) / static_cast<double>(cand.size());
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(max_n)), 0.0, 1.0);
}

double jaccard(std::string_view candidate, std::string_view reference) {
  const auto c = nonempty_tokens(candidate, "candidate");
  const auto r = nonempty_tokens(reference, "reference");
  const std::set<std::string> a(c.begin(), c.end());
  const std::set<std::string> b(r.begin(), r.end());
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double encoding_similarity(std::string_view candidate, std::string_view reference, const Encoder& enc) {
  return cosine_sim(encode_text(candidate, enc), encode_text(reference, enc));
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kBleu: return "bleu";
    case Metric::kJaccard: return "jaccard";
    case Metric::kCosine: return "cosine";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw data_error("CorruptFile", "unknown metric '" + std::string(name) + "'");
}

double MetricTriple::get(Metric m) const {
  switch (m) {
    case Metric::kBleu: return bleu;
    case Metric::kJaccard: return jaccard;
    case Metric::kCosine: return cosine;
  }
  return 0.0;
}

MetricTriple score_answer(std::string_view candidate, std::string_view truth, const Encoder& enc) {
  if (metric_tokens(candidate).empty()) return {};
  return {bleu(candidate, truth), jaccard(candidate, truth), encoding_similarity(candidate, truth, enc)};
}

const Answer& select_best(const Answer& rag, const Answer& baseline, std::string_view truth, const Encoder& enc) {
  const double r = score_answer(rag.text, truth, enc).mean();
  const double b = score_answer(baseline.text, truth, enc).mean();
  return b > r ? baseline : rag;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw data_error("EmptyInput", "no values to summarize");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
  };
  Summary s;
  s.n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

Report build_report(std::vector<CaseScores> cases) {
  if (cases.empty()) throw data_error("EmptyInput", "no cases to report");
  Report report;
  for (auto& c : cases) c.best = c.baseline.mean() > c.rag.mean() ? AnswerMode::kBaseline : AnswerMode::kRag;
  double improvement_sum = 0.0;
  int defined = 0;
  for (Metric m : kMetrics) {
    const auto i = static_cast<std::size_t>(m);
    std::vector<double> rag, base;
    for (const auto& c : cases) {
      rag.push_back(c.rag.get(m));
      base.push_back(c.baseline.get(m));
    }
    report.rag[i] = summarize(rag);
    report.baseline[i] = summarize(base);
    if (report.baseline[i].mean != 0.0) {
      const double pct = 100.0 * (report.rag[i].mean - report.baseline[i].mean) / report.baseline[i].mean;
      report.improvement_pct[i] = pct;
      improvement_sum += pct;
      ++defined;
    }
  }
  if (defined > 0) report.average_improvement_pct = improvement_sum / defined;
  report.cases = std::move(cases);
  return report;
}

Report compare_runs(std::span<const EvalCase> cases, std::span<const Answer> rag, std::span<const Answer> baseline,
                    const Encoder& enc, std::size_t concurrency) {
  std::map<std::string, std::size_t> case_pos;
  for (std::size_t i = 0; i < cases.size(); ++i) case_pos.emplace(cases[i].qid, i);
  auto align = [&](std::span<const Answer> answers, const char* mode) {
    std::vector<const Answer*> slots(cases.size(), nullptr);
    for (const auto& a : answers) {
      auto it = case_pos.find(a.qid);
      if (it == case_pos.end()) throw data_error("MisalignedAnswers", std::string(mode) + " answer for unknown qid " + a.qid);
      if (slots[it->second]) throw data_error("MisalignedAnswers", std::string(mode) + " answer repeated for " + a.qid);
      slots[it->second] = &a;
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i]) throw data_error("MisalignedAnswers", std::string("no ") + mode + " answer for " + cases[i].qid);
    }
    return slots;
  };
  const auto rag_slots = align(rag, "rag");
  const auto base_slots = align(baseline, "baseline");

  std::vector<CaseScores> scores(cases.size());
  std::vector<std::exception_ptr> errors(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        scores[i] = {cases[i].qid, score_answer(rag_slots[i]->text, cases[i].truth, enc),
                     score_answer(base_slots[i]->text, cases[i].truth, enc), AnswerMode::kRag};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(1, cases.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return build_report(std::move(scores));
}

std::string format_double(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

void write_scores_csv(const std::filesystem::path& path, const Report& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << "qid,mode,metric,value\n";
  for (const auto& c : report.cases) {
    for (auto [mode, triple] : {std::pair{AnswerMode::kRag, &c.rag}, std::pair{AnswerMode::kBaseline, &c.baseline}}) {
      for (Metric m : kMetrics) {
        out << csv_field(c.qid) << ',' << to_string(mode) << ',' << metric_name(m) << ',' << format_double(triple->get(m))
            << '\n';
      }
    }
  }
  if (!out) throw io_error("write failed: " + path.string());
}

std::vector<CaseScores> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  CsvReader csv(in);
  std::vector<std::string> fields;
  if (!csv.next(fields) || fields != std::vector<std::string>{"qid", "mode", "metric", "value"}) {
    throw data_error("CorruptFile", path.string() + ": expected header qid,mode,metric,value");
  }
  std::vector<CaseScores> cases;
  std::map<std::string, std::size_t> pos;
  std::map<std::string, int> filled;  // bitmask of (mode, metric) slots per qid
  while (csv.next(fields)) {
    if (fields.size() == 1 && text::trim(fields[0]).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(csv.record_line());
    if (fields.size() != 4) throw data_error("CorruptFile", where + ": expected 4 fields");
    AnswerMode mode;
    Metric metric;
    double value;
    try {
      mode = parse_answer_mode(fields[1]);
      metric = parse_metric(fields[2]);
      value = parse_double(fields[3]);
    } catch (const Error& e) {
      throw data_error("CorruptFile", where + ": " + e.what());
    }
    auto [it, inserted] = pos.emplace(fields[0], cases.size());
    if (inserted) cases.push_back(CaseScores{fields[0], {}, {}, AnswerMode::kRag});
    const int bit = 1 << (static_cast<int>(metric) + (mode == AnswerMode::kRag ? 0 : 3));
    int& mask = filled[fields[0]];
    if (mask & bit) throw data_error("CorruptFile", where + ": duplicate score");
    mask |= bit;
    MetricTriple& t = mode == AnswerMode::kRag ? cases[it->second].rag : cases[it->second].baseline;
    (metric == Metric::kBleu ? t.bleu : metric == Metric::kJaccard ? t.jaccard : t.cosine) = value;
  }
  for (const auto& [qid, mask] : filled) {
    if (mask != 0x3f) throw data_error("CorruptFile", path.string() + ": incomplete scores for " + qid);
  }
  return cases;
}

std::string report_json(const Report& report) {
  nlohmann::ordered_json doc;
  doc["cases"] = report.cases.size();
  auto& agg = doc["aggregates"];
  for (auto [mode, summaries] : {std::pair{"rag", &report.rag}, std::pair{"baseline", &report.baseline}}) {
    for (Metric m : kMetrics) {
      agg[mode][std::string(metric_name(m))] = summary_json((*summaries)[static_cast<std::size_t>(m)]);
    }
  }
  auto& imp = doc["improvement_pct"];
  for (Metric m : kMetrics) {
    const auto& v = report.improvement_pct[static_cast<std::size_t>(m)];
    imp[std::string(metric_name(m))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  doc["average_improvement_pct"] =
      report.average_improvement_pct ? nlohmann::ordered_json(*report.average_improvement_pct) : nlohmann::ordered_json(nullptr);
  auto& per_case = doc["per_case"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cases) {
    per_case.push_back(
        {{"qid", c.qid}, {"rag", triple_json(c.rag)}, {"baseline", triple_json(c.baseline)}, {"best", to_string(c.best)}});
  }
  return doc.dump(2);
}

}  // namespace causalkg
