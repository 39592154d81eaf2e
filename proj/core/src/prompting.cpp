#include "persona/prompting.hpp"

#include <algorithm>

#include "persona/errors.hpp"

namespace persona {

namespace {

constexpr std::string_view kCitationP1 =
    "For an author who has written the paper with the title \"";
constexpr std::string_view kCitationP2 =
    "\", which reference is related? Just answer with [1] or [2] without "
    "explanation. [1]: \"";
constexpr std::string_view kCitationP3 = "\" [2]: \"";
constexpr std::string_view kCitationP4 = "\"";

// Joined profile text is appended to the paper title behind this marker.
constexpr std::string_view kPriorWorksDelimiter = " — prior works: ";

constexpr std::string_view kJoiner = ", and ";

std::string build_lamp2_prefix() {
  std::string tags;
  for (const auto& tag : lamp2_tags()) {
    if (!tags.empty()) tags += ", ";
    tags += tag;
  }
  return "Which tag does this movie relate to among the following tags? Just "
         "answer with the tag name without further explanation. tags: [" +
         tags + "] description: ";
}

[[noreturn]] void template_mismatch(TaskId task, std::string_view input) {
  std::string prefix(input.substr(0, std::min<size_t>(input.size(), 60)));
  throw DataError("input does not match the " + std::string(task_name(task)) +
                  " template; unmatched prefix: \"" + prefix + "\"");
}

}  // namespace

const std::string& input_template_prefix(TaskId task) {
  static const std::string lamp2 = build_lamp2_prefix();
  static const std::string lamp3 =
      "What is the score of the following review on a scale of 1 to 5? just "
      "answer with 1, 2, 3, 4, or 5 without further explanation. review: ";
  static const std::string lamp4 = "Generate a headline for the following article: ";
  static const std::string lamp5 =
      "Generate a title for the following abstract of a paper: ";
  static const std::string lamp6 = "Generate a subject for the following email: ";
  static const std::string lamp7 =
      "Paraphrase the following tweet without any explanation before or after it: ";
  switch (task) {
    case TaskId::LaMP2: return lamp2;
    case TaskId::LaMP3: return lamp3;
    case TaskId::LaMP4: return lamp4;
    case TaskId::LaMP5: return lamp5;
    case TaskId::LaMP6: return lamp6;
    case TaskId::LaMP7: return lamp7;
    case TaskId::LaMP1: break;
  }
  throw ConfigError("LaMP-1 inputs are structured; no single prefix exists");
}

CitationInput parse_citation_input(std::string_view input) {
  if (input.substr(0, kCitationP1.size()) != kCitationP1) {
    template_mismatch(TaskId::LaMP1, input);
  }
  size_t title_begin = kCitationP1.size();
  size_t p2 = input.find(kCitationP2, title_begin);
  if (p2 == std::string_view::npos) template_mismatch(TaskId::LaMP1, input);
  size_t ref1_begin = p2 + kCitationP2.size();
  size_t p3 = input.find(kCitationP3, ref1_begin);
  if (p3 == std::string_view::npos) template_mismatch(TaskId::LaMP1, input);
  size_t ref2_begin = p3 + kCitationP3.size();
  if (input.size() < ref2_begin + kCitationP4.size() ||
      input.substr(input.size() - kCitationP4.size()) != kCitationP4) {
    template_mismatch(TaskId::LaMP1, input);
  }
  CitationInput parts;
  parts.title = std::string(input.substr(title_begin, p2 - title_begin));
  parts.ref1 = std::string(input.substr(ref1_begin, p3 - ref1_begin));
  parts.ref2 = std::string(
      input.substr(ref2_begin, input.size() - kCitationP4.size() - ref2_begin));
  if (parts.title.empty() || parts.ref1.empty() || parts.ref2.empty()) {
    template_mismatch(TaskId::LaMP1, input);
  }
  return parts;
}

std::string render_citation_input(const CitationInput& parts) {
  std::string out;
  out.reserve(kCitationP1.size() + parts.title.size() + kCitationP2.size() +
              parts.ref1.size() + kCitationP3.size() + parts.ref2.size() +
              kCitationP4.size());
  out += kCitationP1;
  out += parts.title;
  out += kCitationP2;
  out += parts.ref1;
  out += kCitationP3;
  out += parts.ref2;
  out += kCitationP4;
  return out;
}

std::string make_query(TaskId task, std::string_view input) {
  if (task == TaskId::LaMP1) {
    CitationInput parts = parse_citation_input(input);
    return parts.title + " " + parts.ref1 + " " + parts.ref2;
  }
  const std::string& prefix = input_template_prefix(task);
  if (input.size() <= prefix.size() || input.substr(0, prefix.size()) != prefix) {
    template_mismatch(task, input);
  }
  return std::string(input.substr(prefix.size()));
}

namespace {

struct PpepPieces {
  // Literal scaffold fragments interleaved with field slots: the rendered
  // PPEP is scaffold[0] + value[0] + scaffold[1] + value[1] + ...
  std::vector<std::string_view> scaffold;
  std::vector<const FieldSlot*> value_slots;
  int main_value_position = 0;  // index into value_slots
};

PpepPieces ppep_pieces(TaskId task) {
  const auto& slots = profile_slots(task);
  PpepPieces p;
  switch (task) {
    case TaskId::LaMP1:
      p.scaffold = {"\"", "\""};
      p.value_slots = {&slots[0]};  // title
      p.main_value_position = 0;
      return p;
    case TaskId::LaMP2:
      p.scaffold = {"the tag for the movie: \"", "\" is \"", "\""};
      p.value_slots = {&slots[0], &slots[1]};  // description, tag
      p.main_value_position = 0;
      return p;
    case TaskId::LaMP3:
      p.scaffold = {"", " is the score for \"", "\""};
      p.value_slots = {&slots[1], &slots[0]};  // score, text
      p.main_value_position = 1;
      return p;
    case TaskId::LaMP4:
    case TaskId::LaMP6:
      p.scaffold = {"\"", "\" is the title for \"", "\""};
      p.value_slots = {&slots[1], &slots[0]};  // title, text
      p.main_value_position = 1;
      return p;
    case TaskId::LaMP5:
      p.scaffold = {"\"", "\" is the title for \"", "\""};
      p.value_slots = {&slots[1], &slots[0]};  // title, abstract
      p.main_value_position = 1;
      return p;
    case TaskId::LaMP7:
      p.scaffold = {"\"", "\""};
      p.value_slots = {&slots[0]};  // text
      p.main_value_position = 0;
      return p;
  }
  throw ConfigError("unknown task id");
}

std::string render_ppep_values(const PpepPieces& pieces,
                               const std::vector<std::string_view>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    out += pieces.scaffold[i];
    out += values[i];
  }
  out += pieces.scaffold.back();
  return out;
}

// Renders one PPEP with the entry's variable text cut to `allowance` tokens
// in total. Non-main fields claim their share first; the main text field is
// tail-truncated to whatever remains.
std::string render_ppep_with_allowance(TaskId task, const ProfileEntry& entry,
                                       size_t allowance, const TokenCounter& counter,
                                       bool& truncated) {
  PpepPieces pieces = ppep_pieces(task);
  std::vector<std::string_view> values(pieces.value_slots.size());
  size_t left = allowance;
  for (size_t i = 0; i < pieces.value_slots.size(); ++i) {
    if (static_cast<int>(i) == pieces.main_value_position) continue;
    const std::string& full = entry.field(*pieces.value_slots[i]);
    std::string_view cut = counter.truncate(full, left);
    if (cut.size() != full.size()) truncated = true;
    values[i] = cut;
    size_t used = counter.count(cut);
    left = (left > used) ? left - used : 0;
  }
  {
    size_t i = static_cast<size_t>(pieces.main_value_position);
    const std::string& full = entry.field(*pieces.value_slots[i]);
    std::string_view cut = counter.truncate(full, left);
    if (cut.size() != full.size()) truncated = true;
    values[i] = cut;
  }
  return render_ppep_values(pieces, values);
}

std::string assemble(TaskId task, std::string_view input,
                     const std::vector<std::string>& ppeps) {
  std::string joined;
  for (size_t i = 0; i < ppeps.size(); ++i) {
    if (i > 0) joined += kJoiner;
    joined += ppeps[i];
  }
  switch (task) {
    case TaskId::LaMP1: {
      CitationInput parts = parse_citation_input(input);
      parts.title += kPriorWorksDelimiter;
      parts.title += joined;
      return render_citation_input(parts);
    }
    case TaskId::LaMP2:
    case TaskId::LaMP3:
    case TaskId::LaMP4:
    case TaskId::LaMP6:
      return joined + ". " + std::string(input);
    case TaskId::LaMP5:
      return joined + ". Following the given patterns " + std::string(input);
    case TaskId::LaMP7:
      return joined + " are written by a person. Following the given patterns " +
             std::string(input);
  }
  throw ConfigError("unknown task id");
}

}  // namespace

std::string render_ppep(TaskId task, const ProfileEntry& entry) {
  PpepPieces pieces = ppep_pieces(task);
  std::vector<std::string_view> values(pieces.value_slots.size());
  for (size_t i = 0; i < pieces.value_slots.size(); ++i) {
    values[i] = entry.field(*pieces.value_slots[i]);
  }
  return render_ppep_values(pieces, values);
}

PersonalizedPrompt aggregate_prompt(TaskId task, std::string_view input,
                                    std::span<const RankedEntry> entries,
                                    size_t budget, const TokenCounter& counter) {
  const size_t input_tokens = counter.count(input);
  if (budget < input_tokens) {
    throw DataError("prompt budget (" + std::to_string(budget) +
                    " tokens) is smaller than the input alone (" +
                    std::to_string(input_tokens) + " tokens)");
  }

  PersonalizedPrompt result;
  if (entries.empty()) {
    result.text = std::string(input);
    result.token_count = input_tokens;
    return result;
  }

  constexpr size_t kMinAllowance = 3;

  for (size_t m = entries.size(); m >= 1; --m) {
    // Fixed overhead for m entries: everything except their variable text.
    bool scaffold_trunc = false;
    std::vector<std::string> empty_ppeps;
    empty_ppeps.reserve(m);
    for (size_t i = 0; i < m; ++i) {
      empty_ppeps.push_back(render_ppep_with_allowance(
          task, *entries[i].entry, 0, counter, scaffold_trunc));
    }
    size_t scaffold_tokens = counter.count(assemble(task, input, empty_ppeps));
    if (scaffold_tokens > budget) continue;

    size_t allowance = (budget - scaffold_tokens) / m;
    if (allowance < kMinAllowance) continue;

    // Quoting can merge tokens across boundaries, so the final count is
    // verified on the assembled string and the allowance shrunk on overshoot.
    while (allowance >= kMinAllowance) {
      bool truncated = false;
      std::vector<std::string> ppeps;
      ppeps.reserve(m);
      for (size_t i = 0; i < m; ++i) {
        ppeps.push_back(render_ppep_with_allowance(task, *entries[i].entry,
                                                   allowance, counter, truncated));
      }
      std::string text = assemble(task, input, ppeps);
      size_t total = counter.count(text);
      if (total <= budget) {
        result.text = std::move(text);
        result.token_count = total;
        result.truncation_applied = truncated || (m < entries.size());
        for (size_t i = 0; i < m; ++i) result.entries_used.push_back(entries[i].index);
        return result;
      }
      size_t overshoot = total - budget;
      size_t shrink = (overshoot + m - 1) / m;
      if (allowance <= shrink) break;
      allowance -= shrink;
    }
  }

  // No entry fits: the prompt degrades to the bare input.
  result.text = std::string(input);
  result.token_count = input_tokens;
  result.truncation_applied = true;
  return result;
}

}  // namespace persona
