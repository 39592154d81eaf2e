#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

// The seven LaMP personalization benchmarks.
enum class TaskId {
  LaMP1,  // citation identification (binary classification)
  LaMP2,  // movie tagging (15-way classification)
  LaMP3,  // product rating (ordinal 1..5)
  LaMP4,  // news headline generation
  LaMP5,  // scholarly title generation
  LaMP6,  // email subject generation
  LaMP7,  // tweet paraphrasing
};

enum class TaskKind {
  BinaryClassification,
  CategoricalClassification15,
  Ordinal1To5,
  Generation,
};

inline constexpr std::array<TaskId, 7> kAllTasks = {
    TaskId::LaMP1, TaskId::LaMP2, TaskId::LaMP3, TaskId::LaMP4,
    TaskId::LaMP5, TaskId::LaMP6, TaskId::LaMP7,
};

TaskKind task_kind(TaskId task);
std::string_view task_name(TaskId task);  // "LaMP-1" .. "LaMP-7"

// Accepts "lamp1", "LaMP-1", "lamp_1", "1".
TaskId parse_task(std::string_view name);

// The 15 movie tags, in prompt order.
const std::vector<std::string>& lamp2_tags();

// The 1..5 rating labels.
const std::vector<std::string>& lamp3_labels();

// One semantic slot of a profile entry: a canonical field name plus
// accepted aliases (the public distribution and the prompt tables do not
// agree on names, e.g. review/text for LaMP-3).
struct FieldSlot {
  std::string_view canonical;
  std::vector<std::string_view> aliases;  // includes canonical

  bool matches(std::string_view name) const;
};

// Required profile-entry slots for a task, in canonical order. All slots
// are searchable text for indexing purposes.
const std::vector<FieldSlot>& profile_slots(TaskId task);

// The slot holding the entry's main body of text (the one truncated first
// under a prompt budget).
const FieldSlot& main_text_slot(TaskId task);

}  // namespace persona
