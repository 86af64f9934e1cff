#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fragkill/levy.hpp"
#include "fragkill/rng.hpp"
#include "fragkill/stats.hpp"

namespace fragkill {

struct SpineEvent {
  double time;
  double decrement;  // log-mass lost at this jump, > 0
};

/// One path of X^x_1(t) = x + ct + log|B_1(t)|, stopped at the first of the
/// horizon, first passage below 0, or death of the tagged fragment.
struct SpinePath {
  double x = 0.0;
  double drift = 0.0;
  std::vector<SpineEvent> events;
  std::optional<double> killed_at;
  std::optional<double> tau_minus;
  double final_time = 0.0;
  double final_position = 0.0;

  /// Position at time t <= final_time (before any death at t).
  double position_at(double t) const noexcept;

  /// log|B_1(t)| = -(sum of decrements up to t).
  double log_mass_at(double t) const noexcept;
};

/// Compound-Poisson simulation of the tagged fragment. With `tilt` set the
/// jumps follow the tilted measure and there is no death clock; without it the
/// original law applies, including killing at rate kappa. x = +infinity
/// removes the barrier.
SpinePath simulate_spine(const LevyModel& model, std::optional<double> tilt, double x, double horizon, Rng& rng);

/// Frequency of paths with no first passage below 0 (and no death) by the
/// horizon. `lundberg_margin` is the mean of 1{survived} exp(-gamma X_T) when
/// the Lundberg exponent exists: an upper bound on P(horizon < tau^- < inf).
struct SpineSurvivalEstimate {
  McEstimate survival;
  std::optional<McEstimate> lundberg_margin;
};

SpineSurvivalEstimate spine_survival_mc(const LevyModel& model, std::optional<double> tilt, double x, double horizon,
                                        std::size_t trials, std::uint64_t seed);

}  // namespace fragkill
