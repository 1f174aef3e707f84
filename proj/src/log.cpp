#include "synprobe/log.hpp"

#include <atomic>
#include <iostream>

namespace synprobe {

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

void log_warning(std::string_view msg) {
  if (g_warnings_enabled.load(std::memory_order_relaxed)) {
    std::cerr << "warning: " << msg << '\n';
  }
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

}  // namespace synprobe
