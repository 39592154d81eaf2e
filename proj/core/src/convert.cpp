#include "persona/convert.hpp"

#include <cmath>

#include "persona/errors.hpp"
#include "persona/tokenize.hpp"

namespace persona {

namespace {

std::string lamp2_input_prefix() {
  std::string tags;
  for (const auto& tag : lamp2_tags()) {
    if (!tags.empty()) tags += ", ";
    tags += tag;
  }
  return "Which tag does this movie relate to among the following tags? Just "
         "answer with the tag name without further explanation. tags: [" +
         tags + "] description: ";
}

TrainingPair lamp7_completion_pair(const ProfileEntry& entry, Rng& rng) {
  const auto& tweet = entry.field(main_text_slot(TaskId::LaMP7));
  auto tokens = whitespace_tokens(tweet);
  if (tokens.size() < 2) {
    throw DataError("degenerate tweet entry " + entry.entry_id +
                    ": fewer than 2 tokens");
  }
  // f ~ U[0.10, 0.20]; prefix takes ceil(f * n) tokens. ceil guarantees a
  // non-empty prefix, and f <= 0.2 guarantees a non-empty suffix for n >= 2.
  double fraction = rng.uniform(0.10, 0.20);
  size_t n = tokens.size();
  size_t prefix_len = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (prefix_len >= n) prefix_len = n - 1;

  const char* base = tweet.data();
  const auto& last_prefix_token = tokens[prefix_len - 1];
  size_t prefix_end = static_cast<size_t>(last_prefix_token.data() - base) +
                      last_prefix_token.size();
  size_t suffix_begin = static_cast<size_t>(tokens[prefix_len].data() - base);

  TrainingPair pair;
  pair.input = "Complete the following tweet: " + tweet.substr(0, prefix_end);
  pair.target = tweet.substr(suffix_begin);
  pair.source_entry_id = entry.entry_id;
  return pair;
}

}  // namespace

TrainingPair convert_profile_entry(TaskId task, const ProfileEntry& entry, Rng& rng) {
  const auto& slots = profile_slots(task);
  TrainingPair pair;
  pair.source_entry_id = entry.entry_id;
  switch (task) {
    case TaskId::LaMP1:
      pair.input = "Write an abstract for this title: " + entry.field(slots[0]);
      pair.target = entry.field(slots[1]);
      return pair;
    case TaskId::LaMP2:
      pair.input = lamp2_input_prefix() + entry.field(slots[0]);
      pair.target = entry.field(slots[1]);
      return pair;
    case TaskId::LaMP3:
      pair.input =
          "What is the score of the following review on a scale of 1 to 5? "
          "just answer with 1, 2, 3, 4, or 5 without further explanation. "
          "review: " +
          entry.field(slots[0]);
      pair.target = entry.field(slots[1]);
      return pair;
    case TaskId::LaMP4:
      pair.input = "Generate a headline for the following article: " +
                   entry.field(slots[0]);
      pair.target = entry.field(slots[1]);
      return pair;
    case TaskId::LaMP5:
      pair.input = "Generate a title for the following abstract of a paper: " +
                   entry.field(slots[0]);
      pair.target = entry.field(slots[1]);
      return pair;
    case TaskId::LaMP6:
      pair.input = "Generate a subject for the following email: " +
                   entry.field(slots[0]);
      pair.target = entry.field(slots[1]);
      return pair;
    case TaskId::LaMP7:
      return lamp7_completion_pair(entry, rng);
  }
  throw ConfigError("unknown task id");
}

TrainingSet build_user_training_set(TaskId task,
                                    std::span<const ProfileEntry> profile, Rng& rng) {
  if (profile.empty()) throw DataError("cannot build a training set from an empty profile");
  TrainingSet out;
  out.pairs.reserve(profile.size());
  for (const auto& entry : profile) {
    if (task == TaskId::LaMP7) {
      const std::string* tweet = entry.find_field(main_text_slot(task));
      if (!tweet || count_whitespace_tokens(*tweet) < 2) {
        ++out.degenerate_skipped;
        continue;
      }
    }
    out.pairs.push_back(convert_profile_entry(task, entry, rng));
  }
  if (out.pairs.empty()) {
    throw DataError("all profile entries are degenerate; empty training set");
  }
  return out;
}

}  // namespace persona
