#include <doctest.h>

#include "persona/dataset.hpp"
#include "persona/privacy.hpp"
#include "persona/retrieval.hpp"

using namespace persona;

namespace {

std::vector<ProfileEntry> tiny_profile() {
  ProfileEntry e;
  e.entry_id = "p";
  e.fields = {{"text", "some words here"}};
  return {e};
}

}  // namespace

TEST_CASE("scoped cross-owner access is recorded as a violation") {
  privacy::reset_stats();
  ProfileIndex index = build_index(tiny_profile(), TaskId::LaMP7, "alice");

  {
    privacy::AccessScope scope("alice");
    retrieve_bm25(index, "words", 1);
  }
  auto stats = privacy::stats();
  CHECK(stats.checked == 1);
  CHECK(stats.violations == 0);

  {
    privacy::AccessScope scope("mallory");
    retrieve_bm25(index, "words", 1);
  }
  stats = privacy::stats();
  CHECK(stats.checked == 2);
  CHECK(stats.violations == 1);
  REQUIRE_FALSE(stats.samples.empty());
  CHECK(stats.samples[0].find("mallory") != std::string::npos);
  CHECK(stats.samples[0].find("alice") != std::string::npos);
  privacy::reset_stats();
}

TEST_CASE("unscoped access is unrestricted") {
  privacy::reset_stats();
  ProfileIndex index = build_index(tiny_profile(), TaskId::LaMP7, "alice");
  retrieve_bm25(index, "words", 1);  // fixture construction, no scope
  auto stats = privacy::stats();
  CHECK(stats.checked == 0);
  CHECK(stats.violations == 0);
}

TEST_CASE("scopes nest and restore") {
  privacy::reset_stats();
  {
    privacy::AccessScope outer("a");
    CHECK(privacy::current_scope() == "a");
    {
      privacy::AccessScope inner("b");
      CHECK(privacy::current_scope() == "b");
    }
    CHECK(privacy::current_scope() == "a");
  }
  CHECK(privacy::current_scope().empty());
}
