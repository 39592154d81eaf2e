#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "persona/dataset.hpp"
#include "persona/rng.hpp"
#include "persona/task.hpp"

namespace persona {

// A supervised pair derived from one profile document.
struct TrainingPair {
  std::string input;
  std::string target;
  std::string source_entry_id;

  bool operator==(const TrainingPair&) const = default;
};

struct TrainingSet {
  std::vector<TrainingPair> pairs;
  size_t degenerate_skipped = 0;
};

// Turns one profile entry into an (input, target) pair. Deterministic for
// every task except LaMP-7, where the tweet split fraction is drawn
// uniformly from [0.10, 0.20] and the input takes the first
// ceil(f * token_count) whitespace tokens.
TrainingPair convert_profile_entry(TaskId task, const ProfileEntry& entry, Rng& rng);

// One pair per non-degenerate entry, in profile order. Degenerate entries
// (LaMP-7 tweets with fewer than 2 tokens) are skipped and counted; an
// all-degenerate profile is an error.
TrainingSet build_user_training_set(TaskId task,
                                    std::span<const ProfileEntry> profile, Rng& rng);

}  // namespace persona
