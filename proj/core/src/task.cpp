#include "persona/task.hpp"

#include <algorithm>
#include <cctype>

#include "persona/errors.hpp"

namespace persona {

TaskKind task_kind(TaskId task) {
  switch (task) {
    case TaskId::LaMP1: return TaskKind::BinaryClassification;
    case TaskId::LaMP2: return TaskKind::CategoricalClassification15;
    case TaskId::LaMP3: return TaskKind::Ordinal1To5;
    case TaskId::LaMP4:
    case TaskId::LaMP5:
    case TaskId::LaMP6:
    case TaskId::LaMP7: return TaskKind::Generation;
  }
  throw ConfigError("unknown task id");
}

std::string_view task_name(TaskId task) {
  switch (task) {
    case TaskId::LaMP1: return "LaMP-1";
    case TaskId::LaMP2: return "LaMP-2";
    case TaskId::LaMP3: return "LaMP-3";
    case TaskId::LaMP4: return "LaMP-4";
    case TaskId::LaMP5: return "LaMP-5";
    case TaskId::LaMP6: return "LaMP-6";
    case TaskId::LaMP7: return "LaMP-7";
  }
  return "?";
}

TaskId parse_task(std::string_view name) {
  std::string digits;
  for (char c : name) {
    if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
  }
  if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '7') {
    return static_cast<TaskId>(digits[0] - '1');
  }
  throw ConfigError("unknown task name: " + std::string(name) +
                    " (expected lamp1..lamp7)");
}

const std::vector<std::string>& lamp2_tags() {
  static const std::vector<std::string> tags = {
      "sci-fi",        "based on a book",   "comedy",
      "action",        "twist ending",      "dystopia",
      "dark comedy",   "classic",           "psychology",
      "fantasy",       "romance",           "thought-provoking",
      "social commentary", "violence",      "true story",
  };
  return tags;
}

const std::vector<std::string>& lamp3_labels() {
  static const std::vector<std::string> labels = {"1", "2", "3", "4", "5"};
  return labels;
}

bool FieldSlot::matches(std::string_view name) const {
  return std::any_of(aliases.begin(), aliases.end(),
                     [&](std::string_view a) { return a == name; });
}

namespace {

const std::vector<FieldSlot>& slots_for(TaskId task) {
  static const std::vector<FieldSlot> lamp1 = {
      {"title", {"title"}},
      {"abstract", {"abstract"}},
  };
  static const std::vector<FieldSlot> lamp2 = {
      {"description", {"description"}},
      {"tag", {"tag"}},
  };
  static const std::vector<FieldSlot> lamp3 = {
      {"text", {"text", "review"}},
      {"score", {"score"}},
  };
  static const std::vector<FieldSlot> lamp4 = {
      {"text", {"text", "article"}},
      {"title", {"title"}},
  };
  static const std::vector<FieldSlot> lamp5 = {
      {"abstract", {"abstract"}},
      {"title", {"title"}},
  };
  static const std::vector<FieldSlot> lamp6 = {
      {"text", {"text", "email"}},
      {"title", {"title"}},
  };
  static const std::vector<FieldSlot> lamp7 = {
      {"text", {"text", "tweet"}},
  };
  switch (task) {
    case TaskId::LaMP1: return lamp1;
    case TaskId::LaMP2: return lamp2;
    case TaskId::LaMP3: return lamp3;
    case TaskId::LaMP4: return lamp4;
    case TaskId::LaMP5: return lamp5;
    case TaskId::LaMP6: return lamp6;
    case TaskId::LaMP7: return lamp7;
  }
  throw ConfigError("unknown task id");
}

}  // namespace

const std::vector<FieldSlot>& profile_slots(TaskId task) {
  return slots_for(task);
}

const FieldSlot& main_text_slot(TaskId task) {
  switch (task) {
    case TaskId::LaMP1: return profile_slots(task)[1];  // abstract
    case TaskId::LaMP2: return profile_slots(task)[0];  // description
    case TaskId::LaMP3: return profile_slots(task)[0];  // text
    case TaskId::LaMP4: return profile_slots(task)[0];  // text
    case TaskId::LaMP5: return profile_slots(task)[0];  // abstract
    case TaskId::LaMP6: return profile_slots(task)[0];  // text
    case TaskId::LaMP7: return profile_slots(task)[0];  // text
  }
  throw ConfigError("unknown task id");
}

}  // namespace persona
