#include <doctest.h>

#include <string>

#include "persona/dataset.hpp"
#include "persona/errors.hpp"

using namespace persona;

namespace {
const std::string kDataDir = PERSONA_TEST_DATA_DIR;
}

TEST_CASE("single record maps field for field") {
  std::string doc = R"([
    {"id": "17",
     "input": "Generate a headline for the following article: X",
     "profile": [
       {"id": "p1", "text": "storm hits", "title": "Storm"},
       {"id": "p2", "text": "rain ends", "title": "Rain"},
       {"id": "p3", "text": "sun returns", "title": "Sun"}
     ]}
  ])";
  Dataset dataset = parse_dataset(doc, TaskId::LaMP4);
  REQUIRE(dataset.records.size() == 1);
  const UserRecord& rec = dataset.records[0];
  CHECK(rec.user_id == "17");
  CHECK(rec.input == "Generate a headline for the following article: X");
  CHECK(rec.profile.size() == 3);
  CHECK(rec.profile[0].entry_id == "p1");
  CHECK(rec.profile[0].field(profile_slots(TaskId::LaMP4)[0]) == "storm hits");
}

TEST_CASE("empty array file gives empty dataset") {
  Dataset dataset = parse_dataset("[]", TaskId::LaMP4);
  CHECK(dataset.records.empty());
}

TEST_CASE("lamp3 fixture loads with review alias and joins golds") {
  Dataset dataset = load_dataset(kDataDir + "/fixtures/lamp3_dataset.json",
                                 TaskId::LaMP3);
  REQUIRE(dataset.records.size() == 5);
  for (const auto& rec : dataset.records) {
    CHECK(rec.profile.size() == 4);
    for (const auto& entry : rec.profile) {
      CHECK_FALSE(entry.field(profile_slots(TaskId::LaMP3)[0]).empty());
      CHECK_FALSE(entry.field(profile_slots(TaskId::LaMP3)[1]).empty());
      CHECK(entry.date.has_value());
    }
  }

  auto golds = load_gold_outputs(kDataDir + "/fixtures/lamp3_golds.json");
  CHECK(golds.size() == 5);
  join_golds(dataset, golds);
  for (const auto& rec : dataset.records) CHECK_FALSE(rec.gold.empty());
}

TEST_CASE("malformed json reports byte offset") {
  try {
    parse_dataset("[{\"id\": }]", TaskId::LaMP4);
    FAIL("expected parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("missing required field names record and field") {
  std::string doc = R"([
    {"id": "9", "input": "Generate a headline for the following article: Y",
     "profile": [{"id": "p", "title": "only title"}]}
  ])";
  try {
    parse_dataset(doc, TaskId::LaMP4);
    FAIL("expected schema error");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("9") != std::string::npos);
    CHECK(msg.find("text") != std::string::npos);
  }
}

TEST_CASE("unknown field combination is a task mismatch") {
  std::string doc = R"([
    {"id": "9", "input": "Generate a headline for the following article: Y",
     "profile": [{"id": "p", "text": "body", "title": "t", "tag": "comedy"}]}
  ])";
  CHECK_THROWS_AS(parse_dataset(doc, TaskId::LaMP4), DataError);
}

TEST_CASE("duplicate record ids are rejected") {
  std::string doc = R"([
    {"id": "9", "input": "Generate a headline for the following article: A",
     "profile": [{"id": "p", "text": "body", "title": "t"}]},
    {"id": "9", "input": "Generate a headline for the following article: B",
     "profile": [{"id": "q", "text": "body2", "title": "t2"}]}
  ])";
  CHECK_THROWS_AS(parse_dataset(doc, TaskId::LaMP4), DataError);
}

TEST_CASE("empty profile rejected at load") {
  std::string doc = R"([
    {"id": "9", "input": "Generate a headline for the following article: Y",
     "profile": []}
  ])";
  CHECK_THROWS_AS(parse_dataset(doc, TaskId::LaMP4), DataError);
}

TEST_CASE("gold files reject duplicates and accept both layouts") {
  CHECK(parse_gold_outputs(R"([{"id":"17","output":"5"}])").size() == 1);
  CHECK_THROWS_AS(
      parse_gold_outputs(R"([{"id":"17","output":"5"},{"id":"17","output":"4"}])"),
      DataError);
  auto wrapped = parse_gold_outputs(
      R"({"task":"LaMP_3","golds":[{"id":"a","output":"1"},{"id":"b","output":"2"}]})");
  CHECK(wrapped.size() == 2);
}

TEST_CASE("join reports orphans on both sides") {
  Dataset dataset = parse_dataset(R"([
    {"id": "a", "input": "Generate a headline for the following article: Z",
     "profile": [{"id":"p","text":"body","title":"t"}]}
  ])", TaskId::LaMP4);
  std::map<std::string, std::string> golds = {{"b", "x"}};
  CHECK_THROWS_AS(join_golds(dataset, golds), DataError);
}

TEST_CASE("dataset roundtrip is identical field for field") {
  Dataset dataset = load_dataset(kDataDir + "/fixtures/lamp2_dataset.json",
                                 TaskId::LaMP2);
  auto golds = load_gold_outputs(kDataDir + "/fixtures/lamp2_golds.json");
  join_golds(dataset, golds);

  std::string serialized = serialize_dataset(dataset);
  Dataset reparsed = parse_dataset(serialized, TaskId::LaMP2);
  REQUIRE(reparsed.records.size() == dataset.records.size());
  for (size_t i = 0; i < dataset.records.size(); ++i) {
    CHECK(reparsed.records[i] == dataset.records[i]);
  }
  // And a second pass serializes byte-identically.
  CHECK(serialize_dataset(reparsed) == serialized);
}

TEST_CASE("timestamps parse dates and datetimes") {
  Timestamp d = parse_timestamp("2021-06-01");
  Timestamp dt = parse_timestamp("2021-06-01 14:30:00");
  Timestamp dt_iso = parse_timestamp("2021-06-01T14:30:00");
  CHECK(dt.epoch_seconds - d.epoch_seconds == 14 * 3600 + 30 * 60);
  CHECK(dt_iso.epoch_seconds == dt.epoch_seconds);
  CHECK(parse_timestamp("2021-06-02").epoch_seconds - d.epoch_seconds == 86400);
  CHECK_THROWS_AS(parse_timestamp("June 1st"), DataError);
  CHECK_THROWS_AS(parse_timestamp("2021-13-01"), DataError);
}

TEST_CASE("searchable text concatenates slots in order") {
  ProfileEntry entry;
  entry.entry_id = "p";
  entry.fields = {{"title", "Storm"}, {"text", "rain fell"}};
  CHECK(searchable_text(TaskId::LaMP4, entry) == "rain fell Storm");
}
