#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fragkill/martingales.hpp"
#include "fragkill/montecarlo.hpp"

namespace fragkill {

enum class Command { Compute, Simulate, Experiment };

enum class SimulateMode { Killed, Unkilled, Spine };

struct ComputeSettings {
  std::vector<double> p_grid;
  std::optional<double> scale_p;  // unset: no scale table
  double scale_h = 0.005;
  double scale_x_max = 5.0;
};

struct SimulateSettings {
  SimulateMode mode = SimulateMode::Killed;
  double x = 0.0;
  double floor_eps = 0.0;
  std::optional<double> tilt;  // spine mode only
  bool m_intrinsic = false;
  bool m_killed = false;
  bool z_mult = false;
  double martingale_p = 1.0;
  std::optional<FunctionTable> z_function;
};

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> horizon;
  std::optional<unsigned> threads;
};

struct Config {
  Command command = Command::Compute;
  std::string experiment;  // experiment name, empty otherwise
  ExperimentConfig run;    // model, seeds, horizon, caps and the experiment fields
  ComputeSettings compute;
  SimulateSettings simulate;
  std::string echo;  // resolved configuration as JSON; loading it reproduces the run
};

const std::vector<std::string>& experiment_names();

/// Parses a JSON configuration for one command. Missing keys take the
/// command's (and experiment's) defaults; unknown keys are rejected. Every
/// failure is a ConfigError, and JSON syntax errors name line and column.
Config parse_config(std::string_view text, Command command, std::string_view experiment, const Overrides& overrides);

Config load_config(const std::string& path, Command command, std::string_view experiment, const Overrides& overrides);

}  // namespace fragkill
