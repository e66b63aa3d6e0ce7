#include "inbox/log.hpp"

#include <atomic>
#include <iostream>

namespace inbox {
namespace {
std::atomic<LogLevel> g_level{LogLevel::Quiet};
}

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void log_info(std::string_view msg) {
  if (log_level() >= LogLevel::Info) std::clog << "[inbox] " << msg << '\n';
}

void log_warn(std::string_view msg) { std::clog << "[inbox] warning: " << msg << '\n'; }

}  // namespace inbox
