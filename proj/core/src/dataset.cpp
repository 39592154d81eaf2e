#include "persona/dataset.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persona/errors.hpp"

namespace persona {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int parse_int_field(std::string_view text, size_t pos, size_t len,
                    std::string_view what) {
  if (pos + len > text.size()) throw DataError("timestamp too short: " + std::string(text));
  int value = 0;
  auto begin = text.data() + pos;
  auto result = std::from_chars(begin, begin + len, value);
  if (result.ec != std::errc() || result.ptr != begin + len) {
    throw DataError("bad " + std::string(what) + " in timestamp: " + std::string(text));
  }
  return value;
}

ordered_json parse_json_document(std::string_view text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is the offset of the failure in the input
    throw DataError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DD with optional [ T]HH:MM:SS
  if (text.size() != 10 && text.size() != 19) {
    throw DataError("unsupported timestamp format: " + std::string(text));
  }
  if (text[4] != '-' || text[7] != '-') {
    throw DataError("unsupported timestamp format: " + std::string(text));
  }
  int year = parse_int_field(text, 0, 4, "year");
  int month = parse_int_field(text, 5, 2, "month");
  int day = parse_int_field(text, 8, 2, "day");
  int hour = 0, minute = 0, second = 0;
  if (text.size() == 19) {
    if ((text[10] != ' ' && text[10] != 'T') || text[13] != ':' || text[16] != ':') {
      throw DataError("unsupported timestamp format: " + std::string(text));
    }
    hour = parse_int_field(text, 11, 2, "hour");
    minute = parse_int_field(text, 14, 2, "minute");
    second = parse_int_field(text, 17, 2, "second");
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60) {
    throw DataError("timestamp out of range: " + std::string(text));
  }
  std::chrono::year_month_day ymd{std::chrono::year{year},
                                  std::chrono::month{static_cast<unsigned>(month)},
                                  std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) throw DataError("invalid calendar date: " + std::string(text));
  auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  Timestamp ts;
  ts.raw = std::string(text);
  ts.epoch_seconds = static_cast<int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
  return ts;
}

const std::string* ProfileEntry::find_field(const FieldSlot& slot) const {
  for (const auto& [name, value] : fields) {
    if (slot.matches(name)) return &value;
  }
  return nullptr;
}

const std::string& ProfileEntry::field(const FieldSlot& slot) const {
  const std::string* v = find_field(slot);
  if (!v) {
    throw DataError("profile entry " + entry_id + " missing field '" +
                    std::string(slot.canonical) + "'");
  }
  return *v;
}

void validate_profile_entry(TaskId task, const ProfileEntry& entry,
                            std::string_view record_id) {
  const auto& slots = profile_slots(task);
  for (const auto& slot : slots) {
    const std::string* v = entry.find_field(slot);
    if (!v) {
      throw DataError("record " + std::string(record_id) + ": profile entry " +
                      entry.entry_id + " missing required field '" +
                      std::string(slot.canonical) + "' for " +
                      std::string(task_name(task)));
    }
    if (v->empty()) {
      throw DataError("record " + std::string(record_id) + ": profile entry " +
                      entry.entry_id + " has empty field '" +
                      std::string(slot.canonical) + "'");
    }
  }
  for (const auto& [name, value] : entry.fields) {
    bool known = false;
    for (const auto& slot : slots) {
      if (slot.matches(name)) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw DataError("record " + std::string(record_id) + ": field '" + name +
                      "' does not belong to the " + std::string(task_name(task)) +
                      " profile format");
    }
  }
}

Dataset parse_dataset(std::string_view json_text, TaskId task) {
  ordered_json doc = parse_json_document(json_text);
  if (!doc.is_array()) {
    throw DataError("dataset file must be a top-level array of records");
  }
  Dataset dataset;
  dataset.task = task;
  dataset.records.reserve(doc.size());
  std::set<std::string> seen_ids;
  for (const auto& rec : doc) {
    if (!rec.is_object()) throw DataError("dataset record is not an object");
    if (!rec.contains("id")) throw DataError("dataset record missing 'id'");
    std::string id =
        rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    if (!rec.contains("input")) {
      throw DataError("record " + id + ": missing 'input'");
    }
    if (!rec.contains("profile")) {
      throw DataError("record " + id + ": missing 'profile'");
    }
    UserRecord user;
    user.user_id = id;
    user.input = rec["input"].get<std::string>();
    if (user.input.empty()) throw DataError("record " + id + ": empty input");
    if (rec.contains("output")) user.gold = rec["output"].get<std::string>();
    if (!seen_ids.insert(user.user_id).second) {
      throw DataError("duplicate record id: " + id);
    }
    const auto& profile = rec["profile"];
    if (!profile.is_array()) {
      throw DataError("record " + id + ": 'profile' must be an array");
    }
    if (profile.empty()) {
      throw DataError("record " + id + ": profile is empty");
    }
    for (const auto& doc_entry : profile) {
      ProfileEntry entry;
      if (doc_entry.contains("id")) {
        entry.entry_id = doc_entry["id"].is_string() ? doc_entry["id"].get<std::string>()
                                                     : doc_entry["id"].dump();
      }
      for (const auto& [key, value] : doc_entry.items()) {
        if (key == "id") continue;
        if (key == "date") {
          entry.date = parse_timestamp(value.get<std::string>());
          continue;
        }
        std::string text =
            value.is_string() ? value.get<std::string>() : value.dump();
        entry.fields.emplace_back(key, std::move(text));
      }
      validate_profile_entry(task, entry, id);
      user.profile.push_back(std::move(entry));
    }
    dataset.records.push_back(std::move(user));
  }
  return dataset;
}

Dataset load_dataset(const std::string& path, TaskId task) {
  return parse_dataset(read_file(path), task);
}

std::map<std::string, std::string> parse_gold_outputs(std::string_view json_text) {
  ordered_json doc = parse_json_document(json_text);
  const ordered_json* golds = nullptr;
  if (doc.is_array()) {
    golds = &doc;
  } else if (doc.is_object() && doc.contains("golds") && doc["golds"].is_array()) {
    golds = &doc["golds"];
  } else {
    throw DataError("golds file must be an array of {id, output} or {task, golds:[...]}");
  }
  std::map<std::string, std::string> out;
  for (const auto& item : *golds) {
    if (!item.contains("id") || !item.contains("output")) {
      throw DataError("golds entry missing id or output");
    }
    std::string id =
        item["id"].is_string() ? item["id"].get<std::string>() : item["id"].dump();
    std::string output = item["output"].is_string() ? item["output"].get<std::string>()
                                                    : item["output"].dump();
    if (!out.emplace(id, std::move(output)).second) {
      throw DataError("duplicate id in golds file: " + id);
    }
  }
  return out;
}

std::map<std::string, std::string> load_gold_outputs(const std::string& path) {
  return parse_gold_outputs(read_file(path));
}

void join_golds(Dataset& dataset, const std::map<std::string, std::string>& golds) {
  std::vector<std::string> missing;
  std::set<std::string> dataset_ids;
  for (auto& record : dataset.records) {
    dataset_ids.insert(record.user_id);
    auto it = golds.find(record.user_id);
    if (it == golds.end()) {
      missing.push_back(record.user_id);
    } else {
      record.gold = it->second;
    }
  }
  std::vector<std::string> orphans;
  for (const auto& [id, output] : golds) {
    (void)output;
    if (!dataset_ids.count(id)) orphans.push_back(id);
  }
  if (!missing.empty() || !orphans.empty()) {
    std::string msg = "golds join failed;";
    if (!missing.empty()) {
      msg += " records without gold:";
      for (const auto& id : missing) msg += " " + id;
      msg += ";";
    }
    if (!orphans.empty()) {
      msg += " gold ids not in dataset:";
      for (const auto& id : orphans) msg += " " + id;
    }
    throw DataError(msg);
  }
}

std::string serialize_dataset(const Dataset& dataset) {
  ordered_json doc = ordered_json::array();
  for (const auto& record : dataset.records) {
    ordered_json rec;
    rec["id"] = record.user_id;
    rec["input"] = record.input;
    if (!record.gold.empty()) rec["output"] = record.gold;
    ordered_json profile = ordered_json::array();
    for (const auto& entry : record.profile) {
      ordered_json e;
      if (!entry.entry_id.empty()) e["id"] = entry.entry_id;
      for (const auto& [name, value] : entry.fields) e[name] = value;
      if (entry.date) e["date"] = entry.date->raw;
      profile.push_back(std::move(e));
    }
    rec["profile"] = std::move(profile);
    doc.push_back(std::move(rec));
  }
  return doc.dump(2);
}

std::string searchable_text(TaskId task, const ProfileEntry& entry) {
  std::string out;
  for (const auto& slot : profile_slots(task)) {
    const std::string* v = entry.find_field(slot);
    if (!v) continue;
    if (!out.empty()) out.push_back(' ');
    out += *v;
  }
  return out;
}

}  // namespace persona
