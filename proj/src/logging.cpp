#include "hirsute/logging.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace hirsute::logging {
namespace {

spdlog::level::level_enum to_spdlog(Level level) {
  switch (level) {
    case Level::kDebug: return spdlog::level::debug;
    case Level::kInfo: return spdlog::level::info;
    case Level::kWarn: return spdlog::level::warn;
    case Level::kError: return spdlog::level::err;
    case Level::kOff: return spdlog::level::off;
  }
  return spdlog::level::warn;
}

struct State {
  State() {
    auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    console = std::make_shared<spdlog::logger>("hirsute", sink);
    console->set_pattern("[%l] %v");
    console->set_level(to_spdlog(level));
  }
  std::mutex mu;
  std::shared_ptr<spdlog::logger> console;
  std::shared_ptr<spdlog::logger> file;
  Level level = Level::kWarn;
};

State& state() {
  static State s;
  return s;
}

}  // namespace

void configure_from_env() {
  const char* raw = std::getenv("HIRSUTE_LOG");
  if (raw == nullptr) return;
  std::string value(raw);
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (value == "debug" || value == "trace") set_level(Level::kDebug);
  else if (value == "info") set_level(Level::kInfo);
  else if (value == "warn" || value == "warning") set_level(Level::kWarn);
  else if (value == "error") set_level(Level::kError);
  else if (value == "off") set_level(Level::kOff);
}

void set_level(Level level) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  s.level = level;
  s.console->set_level(to_spdlog(level));
}

void attach_file(const std::filesystem::path& path) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  auto sink =
      std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), true);
  s.file = std::make_shared<spdlog::logger>("hirsute-file", sink);
  s.file->set_pattern("%Y-%m-%dT%H:%M:%S.%e [%l] %v");
  s.file->set_level(spdlog::level::debug);
  s.file->flush_on(spdlog::level::debug);
}

void detach_file() {
  auto& s = state();
  std::lock_guard lock(s.mu);
  if (s.file) s.file->flush();
  s.file.reset();
}

void write(Level level, std::string_view message) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  s.console->log(to_spdlog(level), message);
  if (s.file) s.file->log(to_spdlog(level), message);
}

}  // namespace hirsute::logging
