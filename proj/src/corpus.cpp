#include "causalkg/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>

#include "builtin_data.hpp"
#include "causalkg/error.hpp"
#include "causalkg/text.hpp"

namespace causalkg {

namespace {

using text::is_alnum_ascii;
using text::is_space;

bool iequals_at(std::string_view s, std::size_t pos, std::string_view lower_needle) {
  if (pos + lower_needle.size() > s.size()) return false;
  for (std::size_t i = 0; i < lower_needle.size(); ++i) {
    char c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != lower_needle[i]) return false;
  }
  return true;
}

std::size_t ifind(std::string_view s, std::string_view lower_needle) {
  for (std::size_t i = 0; i + lower_needle.size() <= s.size(); ++i) {
    if (iequals_at(s, i, lower_needle)) return i;
  }
  return std::string_view::npos;
}

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F600 && cp <= 0x1F64F) ||  // emoticons
         (cp >= 0x1F300 && cp <= 0x1F5FF) ||  // pictographs
         (cp >= 0x1F680 && cp <= 0x1F6FF) ||  // transport and map
         (cp >= 0x1F1E0 && cp <= 0x1F1FF) ||  // flags
         (cp >= 0x2702 && cp <= 0x27B0) ||    // dingbats
         (cp >= 0x24C2 && cp <= 0x1F251);     // enclosed characters
}

std::string strip_html_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '<' && s[j] != '>') ++j;
      if (j < s.size() && s[j] == '>' && j > i + 1) {
        out += ' ';
        i = j + 1;
        continue;
      }
    }
    out += s[i++];
  }
  return out;
}

// Applies `fn` to each whitespace-separated token and rejoins with spaces.
template <typename Fn>
std::string map_tokens(std::string_view s, Fn fn) {
  std::string out;
  out.reserve(s.size());
  for (const auto& token : text::split_whitespace(s)) {
    std::string mapped = fn(std::string_view(token));
    if (mapped.empty()) continue;
    if (!out.empty()) out += ' ';
    out += mapped;
  }
  return out;
}

std::string strip_url(std::string_view token) {
  std::size_t cut = token.size();
  for (std::string_view prefix : {std::string_view("https://"), std::string_view("http://"),
                                  std::string_view("www.")}) {
    std::size_t pos = ifind(token, prefix);
    if (pos != std::string_view::npos && pos + prefix.size() < token.size()) cut = std::min(cut, pos);
  }
  std::string_view kept = token.substr(0, cut);
  // Remnants such as "http://" with nothing after it, or "xhttp", are dropped.
  if (ifind(kept, "http") != std::string_view::npos) return {};
  return std::string(kept);
}

std::string strip_hashtag(std::string_view token) {
  return std::string(token.substr(0, token.find('#')));
}

// Accented letters from the Latin-1 block count as alphanumeric.
bool is_latin1_letter(char32_t cp) { return cp >= 0xC0 && cp <= 0xFF && cp != 0xD7 && cp != 0xF7; }

char32_t lower_latin1(char32_t cp) { return cp >= 0xC0 && cp <= 0xDE ? cp + 0x20 : cp; }

void append_utf8(std::string& out, char32_t cp) {
  // Only called for U+0080..U+07FF.
  out += static_cast<char>(0xC0 | (cp >> 6));
  out += static_cast<char>(0x80 | (cp & 0x3F));
}

// Emoji ranges first, then everything that is not alphanumeric, an apostrophe
// or whitespace.
std::string strip_symbols(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    const char c = s[pos];
    if (static_cast<unsigned char>(c) < 0x80) {
      out += (is_alnum_ascii(c) || c == '\'' || is_space(c)) ? c : ' ';
      ++pos;
      continue;
    }
    const char32_t cp = text::decode_utf8(s, pos);
    if (is_emoji(cp)) {
      out += ' ';
    } else if (is_latin1_letter(cp)) {
      append_utf8(out, lower_latin1(cp));
    } else {
      out += ' ';
    }
  }
  return out;
}

bool is_token_char(char c) { return is_alnum_ascii(c) || c == '\''; }

std::string normalize_apostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t start = pos;
    const char32_t cp = text::decode_utf8(s, pos);
    if (cp == 0x2019 || cp == 0x2018) {
      out += '\'';
    } else {
      out.append(s.substr(start, pos - start));
    }
  }
  return out;
}

int parse_fixed(std::string_view s, std::size_t pos, std::size_t width, std::string_view raw) {
  if (pos + width > s.size()) throw data_error("UnparseableDate", std::string(raw));
  int value = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (s[i] < '0' || s[i] > '9') throw data_error("UnparseableDate", std::string(raw));
    value = value * 10 + (s[i] - '0');
  }
  return value;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

bool CsvReader::next(std::vector<std::string>& fields) {
  fields.clear();
  int c = in_.get();
  if (c == EOF) return false;
  record_line_ = line_;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  while (true) {
    if (c == EOF) {
      fields.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          field += '"';
          in_.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field += ch;
      }
    } else if (ch == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
    } else if (ch == '\r' && in_.peek() == '\n') {
      // CRLF: handled by the '\n' branch next iteration.
    } else if (ch == '\n') {
      ++line_;
      fields.push_back(std::move(field));
      return true;
    } else {
      field += ch;
    }
    c = in_.get();
  }
}

CorpusReader::CorpusReader(std::istream& in, std::string_view text_column,
                           std::string_view date_column)
    : csv_(in) {
  if (in.peek() == 0xEF) {
    char bom[3] = {};
    in.read(bom, 3);
    if (std::string_view(bom, 3) != "\xEF\xBB\xBF") in.seekg(0);
  }
  if (!csv_.next(header_)) throw data_error("MissingColumn", std::string(text_column));
  auto index_of = [&](std::string_view name) {
    auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) throw data_error("MissingColumn", std::string(name));
    return static_cast<std::size_t>(it - header_.begin());
  };
  text_index_ = index_of(text_column);
  date_index_ = index_of(date_column);
}

std::optional<RawRecord> CorpusReader::next() {
  std::vector<std::string> fields;
  while (csv_.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header_.size()) {
      malformed_.push_back(csv_.record_line());
      continue;
    }
    RawRecord record;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == text_index_) {
        record.text = std::move(fields[i]);
      } else if (i == date_index_) {
        record.date = std::move(fields[i]);
      } else {
        record.extra.emplace(header_[i], std::move(fields[i]));
      }
    }
    return record;
  }
  return std::nullopt;
}

LoadResult load_corpus(const std::filesystem::path& path, std::string_view text_column,
                       std::string_view date_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  CorpusReader reader(in, text_column, date_column);
  LoadResult result;
  while (auto record = reader.next()) result.records.push_back(std::move(*record));
  result.malformed_lines = reader.malformed_lines();
  return result;
}

ContractionDictionary::ContractionDictionary(const std::map<std::string, std::string>& entries) {
  for (const auto& [key, value] : entries) {
    std::string lowered = text::to_lower_ascii(normalize_apostrophes(text::trim(key)));
    if (lowered.empty()) throw config_error("contractions", "empty key");
    std::string_view first = value;
    if (auto slash = first.find('/'); slash != std::string_view::npos) first = first.substr(0, slash);
    std::string expansion = text::normalize_phrase(first);
    auto [it, inserted] = entries_.emplace(lowered, expansion);
    if (!inserted && it->second != expansion) {
      throw config_error("contractions", "conflicting expansions for '" + lowered + "'");
    }
  }
}

ContractionDictionary ContractionDictionary::from_json_text(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("contractions", e.what());
  }
  if (!doc.is_object()) throw config_error("contractions", "expected a JSON object");
  std::map<std::string, std::string> entries;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) throw config_error("contractions", "value for '" + key + "' is not a string");
    entries.emplace(key, value.get<std::string>());
  }
  return ContractionDictionary(entries);
}

ContractionDictionary ContractionDictionary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(body);
}

const ContractionDictionary& ContractionDictionary::builtin() {
  static const ContractionDictionary dict = from_json_text(builtin::kContractionsJson);
  return dict;
}

std::optional<std::string_view> ContractionDictionary::lookup(std::string_view token) const {
  auto it = entries_.find(text::to_lower_ascii(token));
  if (it == entries_.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::string expand_contractions(std::string_view input, const ContractionDictionary& dict) {
  const std::string s = normalize_apostrophes(input);
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_token_char(s[i])) {
      out += s[i++];
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_token_char(s[j])) ++j;
    std::string_view token(s.data() + i, j - i);
    if (auto hit = dict.lookup(token)) {
      out += *hit;
    } else {
      // Retry without surrounding quote marks: "'can't'" -> "'cannot'".
      std::size_t lead = 0;
      std::size_t tail = token.size();
      while (lead < tail && token[lead] == '\'') ++lead;
      while (tail > lead && token[tail - 1] == '\'') --tail;
      auto inner = token.substr(lead, tail - lead);
      auto inner_hit = (lead || tail != token.size()) && !inner.empty() ? dict.lookup(inner) : std::nullopt;
      if (inner_hit) {
        out.append(token.substr(0, lead));
        out += *inner_hit;
        out.append(token.substr(tail));
      } else {
        out.append(token);
      }
    }
    i = j;
  }
  return out;
}

std::string clean_text(std::string_view input) {
  std::string s = strip_html_tags(input);
  s = map_tokens(s, strip_url);
  s = map_tokens(s, strip_hashtag);
  s = strip_symbols(s);
  s = text::to_lower_ascii(s);
  return text::join(text::split_whitespace(s), " ");
}

Timestamp normalize_timestamp(std::string_view raw) {
  const std::string_view s = text::trim(raw);
  auto fail = [&]() { return data_error("UnparseableDate", std::string(raw)); };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') throw fail();
  const int year = parse_fixed(s, 0, 4, raw);
  const int month = parse_fixed(s, 5, 2, raw);
  const int day = parse_fixed(s, 8, 2, raw);
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) throw fail();

  std::size_t pos = 10;
  int hour = 0, minute = 0, second = 0;
  if (pos < s.size() && (s[pos] == ' ' || s[pos] == 'T')) {
    if (s.size() < pos + 9 || s[pos + 3] != ':' || s[pos + 6] != ':') throw fail();
    hour = parse_fixed(s, pos + 1, 2, raw);
    minute = parse_fixed(s, pos + 4, 2, raw);
    second = parse_fixed(s, pos + 7, 2, raw);
    if (hour > 23 || minute > 59 || second > 59) throw fail();
    pos += 9;
  }

  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      pos += 1;
    } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      const int oh = parse_fixed(s, pos + 1, 2, raw);
      const int om = parse_fixed(s, pos + 4, 2, raw);
      if (oh > 23 || om > 59) throw fail();
      offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
      pos += 6;
    } else {
      throw fail();
    }
  }

  const std::int64_t local = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
                             hour * 3600 + minute * 60 + second;
  const std::int64_t utc = local - offset;
  if (utc < 0) throw fail();
  return utc;
}

std::string format_timestamp(Timestamp ts) {
  std::int64_t days = ts / 86400;
  std::int64_t rem = ts % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  // Inverse of days_from_civil.
  const std::int64_t z = days + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y0 = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  const std::int64_t y = y0 + (m <= 2);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u %02lld:%02lld:%02lld", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

std::string preprocess_text(std::string_view raw_text, const ContractionDictionary& dict) {
  return clean_text(expand_contractions(raw_text, dict));
}

IngestResult ingest(const std::filesystem::path& path, std::string_view text_column,
                    std::string_view date_column, const ContractionDictionary& dict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  CorpusReader reader(in, text_column, date_column);
  IngestResult result;
  TweetId next_id = 0;
  while (auto record = reader.next()) {
    const TweetId id = next_id++;
    Timestamp ts = 0;
    try {
      ts = normalize_timestamp(record->date);
    } catch (const Error&) {
      ++result.bad_dates;
      continue;
    }
    std::string cleaned = preprocess_text(record->text, dict);
    if (cleaned.empty()) {
      ++result.empty_texts;
      continue;
    }
    result.tweets.push_back(Tweet{id, std::move(cleaned), ts});
  }
  result.malformed_lines = reader.malformed_lines();
  return result;
}

TweetStore::TweetStore(std::vector<Tweet> tweets) : tweets_(std::move(tweets)) {
  std::sort(tweets_.begin(), tweets_.end(), [](const Tweet& a, const Tweet& b) { return a.id < b.id; });
}

const Tweet* TweetStore::find(TweetId id) const {
  auto it = std::lower_bound(tweets_.begin(), tweets_.end(), id,
                             [](const Tweet& t, TweetId value) { return t.id < value; });
  return it != tweets_.end() && it->id == id ? &*it : nullptr;
}

void write_tweets_jsonl(const std::filesystem::path& path, std::span<const Tweet> tweets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  for (const auto& t : tweets) {
    nlohmann::json line = {{"id", t.id}, {"text", t.text}, {"ts", t.timestamp}};
    out << line.dump() << '\n';
  }
  if (!out) throw io_error("write failed: " + path.string());
}

std::vector<Tweet> read_tweets_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<Tweet> tweets;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      tweets.push_back(Tweet{j.at("id").get<TweetId>(), j.at("text").get<std::string>(),
                             j.at("ts").get<Timestamp>()});
    } catch (const nlohmann::json::exception&) {
      throw data_error("CorruptFile", path.string() + ":" + std::to_string(lineno));
    }
  }
  return tweets;
}

}  // namespace causalkg
