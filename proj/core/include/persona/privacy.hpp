#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace persona::privacy {

// Owner-tagged data access monitor. Every per-user pipeline runs inside an
// AccessScope; owner-tagged objects (profile indexes, adapters, per-user
// models) report their owner on use. An access whose owner differs from the
// active scope is recorded as a cross-user violation. Accesses outside any
// scope are unrestricted (fixture construction, tooling).
class AccessScope {
 public:
  explicit AccessScope(std::string_view user_id);
  ~AccessScope();

  AccessScope(const AccessScope&) = delete;
  AccessScope& operator=(const AccessScope&) = delete;

 private:
  bool had_previous_;
  std::string previous_;
};

// Records one owner-tagged access against the current scope.
void on_access(std::string_view owner);

// Current scope's user id, or empty when unscoped.
std::string current_scope();

struct AccessStats {
  uint64_t checked = 0;
  uint64_t violations = 0;
  std::vector<std::string> samples;  // first few "<scope> touched <owner>"
};

AccessStats stats();
void reset_stats();

}  // namespace persona::privacy
