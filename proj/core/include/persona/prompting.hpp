#pragma once

#include <span>
#include <string>
#include <vector>

#include "persona/dataset.hpp"
#include "persona/task.hpp"
#include "persona/tokenize.hpp"

namespace persona {

// Profile context + task input, assembled under a token budget.
struct PersonalizedPrompt {
  std::string text;
  size_t token_count = 0;
  std::vector<int> entries_used;  // profile indices, retrieval rank order
  bool truncation_applied = false;
};

// Fixed prefix of the task input template for the prefix-shaped tasks
// (LaMP-2..7). LaMP-1 inputs are structured and parsed separately.
const std::string& input_template_prefix(TaskId task);

// Structured LaMP-1 input: paper title plus two candidate references.
struct CitationInput {
  std::string title;
  std::string ref1;
  std::string ref2;
};

CitationInput parse_citation_input(std::string_view input);
std::string render_citation_input(const CitationInput& parts);

// Query generation: returns only the variable content of the input, with
// template boilerplate removed. Throws DataError on template mismatch.
std::string make_query(TaskId task, std::string_view input);

// Per-profile-entry prompt, rendered byte-exactly.
std::string render_ppep(TaskId task, const ProfileEntry& entry);

// One retrieved entry paired with its profile index.
struct RankedEntry {
  int index;
  const ProfileEntry* entry;
};

// Joins PPEPs with ", and ", applies the task's aggregation fragments, and
// enforces the token budget: the input and fixed template text are reserved
// first, each entry's variable text is cut to an equal allowance, and
// trailing entries are dropped when their allowance would fall below 3
// tokens. Throws DataError when the budget cannot fit the input alone.
PersonalizedPrompt aggregate_prompt(TaskId task, std::string_view input,
                                    std::span<const RankedEntry> entries,
                                    size_t budget,
                                    const TokenCounter& counter = whitespace_counter());

}  // namespace persona
