#pragma once

#include <map>
#include <string>
#include <vector>

namespace hirsute::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCalibration = 3,
};

// `key = value` lines; '#' starts a comment. Keys use underscores, matching
// the long flags with '-' replaced. Throws UsageError on malformed lines.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Entry point; `args` excludes the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace hirsute::cli
