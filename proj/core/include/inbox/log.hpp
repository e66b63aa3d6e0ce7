#pragma once

#include <string_view>

namespace inbox {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

// Process-wide verbosity for diagnostic messages written to stderr.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(std::string_view msg);
void log_warn(std::string_view msg);

}  // namespace inbox
