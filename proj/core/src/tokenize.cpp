#include "persona/tokenize.hpp"

#include <cctype>

namespace persona {

namespace {

inline bool is_alnum_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline char lower_byte(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

inline bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::vector<std::string> alnum_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_alnum_byte(c)) {
      cur.push_back(lower_byte(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < n && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

size_t count_whitespace_tokens(std::string_view text) {
  size_t count = 0;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i < n) {
      ++count;
      while (i < n && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    }
  }
  return count;
}

std::string_view head_tokens(std::string_view text, size_t n) {
  if (n == 0) return text.substr(0, 0);
  size_t count = 0;
  size_t i = 0;
  const size_t len = text.size();
  while (i < len) {
    while (i < len && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= len) break;
    ++count;
    while (i < len && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (count == n) return text.substr(0, i);
  }
  return text;
}

const TokenCounter& whitespace_counter() {
  static const WhitespaceCounter counter;
  return counter;
}

}  // namespace persona
