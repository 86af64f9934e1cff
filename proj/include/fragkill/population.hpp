#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fragkill/levy.hpp"

namespace fragkill {

struct Caps {
  std::size_t max_blocks = 1'000'000;
  // Children created more than this many log-mass units below the current
  // largest block are dropped. Infinite disables pruning.
  double prune_window = std::numeric_limits<double>::infinity();
  bool hard = false;  // report a capped run as a failure at the CLI
};

struct Block {
  std::uint64_t id;
  std::uint64_t parent;
  double log_mass;
  double birth_time;
  double next_split;
};

/// Alive blocks' log-masses at time t, ascending (smallest mass first).
struct Snapshot {
  double t = 0.0;
  std::vector<double> log_masses;
};

struct Checkpoint {
  double t = 0.0;
  std::size_t blocks = 0;
  double log_lambda1 = -std::numeric_limits<double>::infinity();
  double total_mass = 0.0;
  double dropped_mass = 0.0;  // mass removed by the floor or pruning so far
};

struct Trajectory {
  std::vector<Checkpoint> checkpoints;
  std::vector<Snapshot> snapshots;  // parallel to checkpoints when requested
  bool extinct = false;
  std::optional<double> zeta;
  bool capped = false;
  std::optional<double> capped_at;
  std::size_t events = 0;
  std::size_t peak_blocks = 0;
};

struct RunOptions {
  double horizon = 0.0;
  std::vector<double> checkpoints;  // ascending, within [0, horizon]
  Caps caps;
  bool keep_snapshots = false;
};

/// Killed chain: a child of log-mass l created at time t is discarded when
/// l < -(x + c t). Each block's split clock and partition come from its own
/// stream keyed by (seed, block id), so runs at different x with one seed are
/// coupled and results do not depend on event scheduling.
Trajectory run_killed(const LevyModel& model, double x, const RunOptions& options, std::uint64_t seed);

/// Same chain without the barrier. Children below floor_eps are dropped and
/// their mass is accounted in dropped_mass; floor_eps = 0 disables the floor.
Trajectory run_unkilled(const DislocationMeasure& nu, double floor_eps, const RunOptions& options,
                        std::uint64_t seed);

}  // namespace fragkill
