#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "persona/task.hpp"

namespace persona {

// ISO-8601 date or datetime. `raw` keeps the original spelling so a parsed
// dataset serializes back byte-for-byte.
struct Timestamp {
  std::string raw;
  int64_t epoch_seconds = 0;

  bool operator==(const Timestamp&) const = default;
};

// Parses "YYYY-MM-DD" or "YYYY-MM-DD[ T]HH:MM:SS". Throws DataError.
Timestamp parse_timestamp(std::string_view text);

// One profile document d_(i,j). Fields keep document order for exact
// serialization roundtrips.
struct ProfileEntry {
  std::string entry_id;
  std::vector<std::pair<std::string, std::string>> fields;
  std::optional<Timestamp> date;

  // Resolves a semantic slot through its aliases. Throws DataError when
  // the slot is absent.
  const std::string& field(const FieldSlot& slot) const;
  const std::string* find_field(const FieldSlot& slot) const;

  bool operator==(const ProfileEntry&) const = default;
};

// One benchmark instance: user id, task input x, gold output y, profile P.
struct UserRecord {
  std::string user_id;
  std::string input;
  std::string gold;  // empty until joined with a golds file
  std::vector<ProfileEntry> profile;

  bool operator==(const UserRecord&) const = default;
};

struct Dataset {
  TaskId task = TaskId::LaMP1;
  std::vector<UserRecord> records;
};

// Validates one profile entry against the task schema: every slot present
// through some alias, values non-empty, no unknown fields.
void validate_profile_entry(TaskId task, const ProfileEntry& entry,
                            std::string_view record_id);

// Loads a dataset file: a top-level array of {id, input, profile:[...]}.
// Gold outputs are left empty; join them via load_gold_outputs + join_golds.
Dataset load_dataset(const std::string& path, TaskId task);
Dataset parse_dataset(std::string_view json_text, TaskId task);

// Golds file: {"task": ..., "golds": [{id, output}]} or a bare array of
// {id, output}. Duplicate ids are rejected.
std::map<std::string, std::string> load_gold_outputs(const std::string& path);
std::map<std::string, std::string> parse_gold_outputs(std::string_view json_text);

// 1:1 join by id; ids on either side without a partner are an error.
void join_golds(Dataset& dataset, const std::map<std::string, std::string>& golds);

// Lossless serialization of a (possibly joined) dataset.
std::string serialize_dataset(const Dataset& dataset);

// Concatenation of the task's searchable fields, in slot order. This is
// the text both the lexical index and the embedding retriever see.
std::string searchable_text(TaskId task, const ProfileEntry& entry);

}  // namespace persona
