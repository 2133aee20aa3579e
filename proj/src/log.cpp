#include "betaips/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace betaips {
namespace {
std::atomic<bool> g_enabled{true};
std::mutex g_mutex;
}  // namespace

void set_warnings_enabled(bool enabled) { g_enabled.store(enabled); }
bool warnings_enabled() { return g_enabled.load(); }

void warn(std::string_view message) {
  if (!g_enabled.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace betaips
