#include "persona/privacy.hpp"

#include <atomic>
#include <mutex>

namespace persona::privacy {

namespace {

thread_local bool t_scoped = false;
thread_local std::string t_scope;

std::atomic<uint64_t> g_checked{0};
std::atomic<uint64_t> g_violations{0};
std::mutex g_samples_mutex;
std::vector<std::string> g_samples;
constexpr size_t kMaxSamples = 16;

}  // namespace

AccessScope::AccessScope(std::string_view user_id)
    : had_previous_(t_scoped), previous_(t_scope) {
  t_scoped = true;
  t_scope.assign(user_id);
}

AccessScope::~AccessScope() {
  t_scoped = had_previous_;
  t_scope = previous_;
}

void on_access(std::string_view owner) {
  if (!t_scoped) return;
  g_checked.fetch_add(1, std::memory_order_relaxed);
  if (owner != t_scope) {
    g_violations.fetch_add(1, std::memory_order_relaxed);
    std::lock_guard<std::mutex> lock(g_samples_mutex);
    if (g_samples.size() < kMaxSamples) {
      g_samples.push_back(t_scope + " touched data owned by " + std::string(owner));
    }
  }
}

std::string current_scope() { return t_scoped ? t_scope : std::string(); }

AccessStats stats() {
  AccessStats s;
  s.checked = g_checked.load();
  s.violations = g_violations.load();
  std::lock_guard<std::mutex> lock(g_samples_mutex);
  s.samples = g_samples;
  return s;
}

void reset_stats() {
  g_checked.store(0);
  g_violations.store(0);
  std::lock_guard<std::mutex> lock(g_samples_mutex);
  g_samples.clear();
}

}  // namespace persona::privacy
