#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fragkill/levy.hpp"
#include "fragkill/martingales.hpp"
#include "fragkill/population.hpp"
#include "fragkill/stats.hpp"

namespace fragkill {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write into
/// slot i of preallocated storage, so the outcome never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Seed of trial `index` in the sub-experiment `stream` of a master seed.
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index);

struct Functional {
  enum class Kind { ConstantOne, IndicatorMassAbove };
  Kind kind = Kind::ConstantOne;
  // Threshold a for IndicatorMassAbove; unset means a = exp(-t c_pbar).
  std::optional<double> threshold;

  std::string name() const;
};

struct ExperimentConfig {
  explicit ExperimentConfig(LevyModel m) : model(std::move(m)) {}

  LevyModel model;
  std::vector<double> x_values{0.0};
  std::vector<double> p_values{1.0};
  double horizon = 100.0;
  std::size_t trials = 10000;
  std::vector<double> checkpoints;
  Caps caps;
  std::uint64_t master_seed = 20240611;
  unsigned threads = 1;

  // extinction: x values where the frequency must lie in (0.01, 0.99); empty
  // means every x
  std::vector<double> interior_x;
  // decay
  std::size_t batches = 10;
  std::size_t baseline_seeds = 10;
  // many-to-one
  std::vector<Functional> functionals;
  // martingales: extinction curve feeding Z^{x,g}
  std::vector<double> curve_grid;
  std::size_t curve_trials = 10000;
  double curve_horizon = 100.0;
  std::size_t curve_cap = 200;
  std::vector<double> z_times;
  // spine-survival and martingales
  double scale_step = 0.005;
};

struct Check {
  std::string name;
  bool passed = true;
  bool hard = true;  // informational checks never fail an experiment
  std::string detail;
};

bool all_hard_passed(const std::vector<Check>& checks);

enum class SpeedRegime { Subcritical, Critical, Supercritical };
SpeedRegime speed_regime(const LevyModel& model);

struct ExtinctionReport {
  SpeedRegime regime = SpeedRegime::Supercritical;
  ExtinctionCurve curve;             // extinct by horizon
  std::vector<McEstimate> doubled;   // extinct by 2 * horizon
  std::vector<std::size_t> capped;   // runs stopped at caps.max_blocks, counted as surviving
  double cap_bias_bound = 0.0;       // g_hat(0)^max_blocks
  std::vector<Check> checks;
};

/// Extinct-by-horizon frequency over the x grid: a lower bound of
/// P(zeta^x < inf). All x share per-trial seeds, so runs are coupled in x.
ExtinctionReport estimate_extinction(const ExperimentConfig& cfg);

struct DecayBatch {
  std::size_t survivors = 0;
  double median_t = 0.0;   // median of -log lambda_1(T) / T
  double median_2t = 0.0;  // same at 2T
};

struct DecayReport {
  double target = 0.0;  // c_pbar
  std::vector<DecayBatch> batches;
  std::vector<double> rates_t;   // pooled survivors
  std::vector<double> rates_2t;
  std::size_t capped = 0;
  std::vector<double> baseline_2t;  // unkilled, one per seed
  std::vector<Check> checks;
};

/// Conditional on survival to 2T: -log lambda^x_1 / t at T and 2T.
/// Requires c > c_pbar; throws InsufficientSurvivors below 50 paths.
DecayReport estimate_decay_rate(const ExperimentConfig& cfg);

struct GrowthRow {
  double t = 0.0;
  std::size_t survivors = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::size_t max_blocks = 0;
  double bound = 0.0;  // e^{x + ct}
};

struct GrowthReport {
  std::vector<GrowthRow> rows;
  std::size_t capped_survivors = 0;
  std::vector<Check> checks;
};

/// N^x_t on paths surviving to the horizon. Requires c > c_pbar.
GrowthReport estimate_population_growth(const ExperimentConfig& cfg);

struct ManyToOneRow {
  std::string functional;
  double t = 0.0;
  double threshold = 0.0;
  McEstimate lhs;  // mass-weighted sum over blocks
  McEstimate rhs;  // spine expectation, zero on killed spines
};

struct ManyToOneReport {
  std::vector<ManyToOneRow> rows;
  std::vector<Check> checks;
};

ManyToOneReport many_to_one_check(const ExperimentConfig& cfg);

struct SpineSurvivalRow {
  double p = 0.0;
  double x = 0.0;
  double analytic = 0.0;
  McEstimate mc;
  double margin = 0.0;  // truncation allowance above the analytic value
  std::optional<McEstimate> mc_doubled;  // degenerate case only
};

struct SpineSurvivalReport {
  std::vector<SpineSurvivalRow> rows;
  std::vector<Check> checks;
};

SpineSurvivalReport verify_spine_survival(const ExperimentConfig& cfg);

struct MartingaleRow {
  std::string quantity;  // M, Mx, Z
  double p = 0.0;
  double t = 0.0;
  McEstimate estimate;
  double target = 0.0;
  double allowance = 0.0;  // |mean - target| must not exceed this
  bool passed = true;
};

struct MartingaleReport {
  std::vector<MartingaleRow> rows;
  std::optional<ExtinctionCurve> curve;
  std::vector<Check> checks;
};

MartingaleReport martingale_mean_suite(const ExperimentConfig& cfg);

}  // namespace fragkill
