#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

// Lowercased maximal [a-z0-9]+ runs. Shared by retrieval, ROUGE and the
// toy-model word tokenizer so scores are comparable across modules.
std::vector<std::string> alnum_tokens(std::string_view text);

// Whitespace-delimited tokens as views into the original text.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

size_t count_whitespace_tokens(std::string_view text);

// First `n` whitespace tokens, original inter-token bytes preserved.
// Returns the whole text if it has <= n tokens.
std::string_view head_tokens(std::string_view text, size_t n);

// Token counter used by prompt budgeting. Whitespace by default; a
// model-specific subword counter can be swapped in.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual size_t count(std::string_view text) const = 0;
  // Longest prefix of `text` with at most `budget` tokens.
  virtual std::string_view truncate(std::string_view text, size_t budget) const = 0;
};

class WhitespaceCounter final : public TokenCounter {
 public:
  size_t count(std::string_view text) const override {
    return count_whitespace_tokens(text);
  }
  std::string_view truncate(std::string_view text, size_t budget) const override {
    return head_tokens(text, budget);
  }
};

const TokenCounter& whitespace_counter();

}  // namespace persona
