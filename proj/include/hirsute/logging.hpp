#pragma once

#include <filesystem>
#include <string_view>
#include <utility>

#include <fmt/format.h>

namespace hirsute::logging {

enum class Level { kDebug, kInfo, kWarn, kError, kOff };

// Reads HIRSUTE_LOG (debug|info|warn|error|off); unset means warn.
void configure_from_env();
void set_level(Level level);

// Mirrors all subsequent messages, with timestamps, into `path`.
void attach_file(const std::filesystem::path& path);
void detach_file();

void write(Level level, std::string_view message);

template <typename... Args>
void debug(fmt::format_string<Args...> f, Args&&... args) {
  write(Level::kDebug, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  write(Level::kInfo, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void warn(fmt::format_string<Args...> f, Args&&... args) {
  write(Level::kWarn, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void error(fmt::format_string<Args...> f, Args&&... args) {
  write(Level::kError, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace hirsute::logging
