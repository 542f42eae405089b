#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace causalkg::text {

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s);
// Lowercase, trim, and collapse inner whitespace runs to one space.
std::string normalize_phrase(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
inline bool is_alnum_ascii(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Decodes one UTF-8 sequence starting at s[pos]. Returns the code point and
// advances pos; invalid bytes decode to U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos);

}  // namespace causalkg::text
