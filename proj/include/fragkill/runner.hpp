#pragma once

#include <string>
#include <string_view>

#include "fragkill/config.hpp"
#include "fragkill/error.hpp"

namespace fragkill {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitNumeric = 2,
  kExitCap = 3,
  kExitStatistical = 4,
};

int exit_code_for(Errc code) noexcept;

struct RunRequest {
  Command command = Command::Compute;
  std::string experiment;
  std::string config_path;
  std::string out_path;
  Overrides overrides;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string message;  // empty on success
};

/// Runs one command end to end. Outputs:
///   compute     out (JSON)
///   simulate    out (CSV)
///   experiment  out (CSV) and out.summary.json
/// plus out.manifest.json for every command that gets past configuration.
/// Never throws.
RunOutcome execute(const RunRequest& request) noexcept;

/// Writes to a temporary sibling and renames it over `path`.
void write_atomically(const std::string& path, std::string_view contents);

/// Shortest round-trip decimal form, '.' separator regardless of locale.
std::string format_number(double value);

}  // namespace fragkill
