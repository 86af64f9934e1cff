#include "fragkill/spine.hpp"

#include <cmath>
#include <limits>

#include "fragkill/error.hpp"

namespace fragkill {

double SpinePath::position_at(double t) const noexcept {
  double lost = 0.0;
  for (const SpineEvent& e : events) {
    if (e.time > t) break;
    lost += e.decrement;
  }
  return x + drift * t - lost;
}

double SpinePath::log_mass_at(double t) const noexcept {
  double lost = 0.0;
  for (const SpineEvent& e : events) {
    if (e.time > t) break;
    lost += e.decrement;
  }
  return -lost;
}

SpinePath simulate_spine(const LevyModel& model, std::optional<double> tilt, double x, double horizon, Rng& rng) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(Errc::InvalidArgument, "spine horizon must be positive");
  if (!(x >= 0.0)) throw Error(Errc::InvalidArgument, "barrier offset x must be >= 0");

  const JumpMeasure jumps = tilted_jump_measure(model.measure(), tilt.value_or(0.0));
  const double jump_rate = jumps.total_rate();
  const double killing = tilt ? 0.0 : jumps.killing;
  const double c = model.c();
  constexpr double inf = std::numeric_limits<double>::infinity();

  SpinePath path;
  path.x = x;
  path.drift = c;

  const double death_time = killing > 0.0 ? rng.exponential(killing) : inf;
  double t = 0.0;
  double lost = 0.0;  // accumulated log-mass decrements
  for (;;) {
    const double next = jump_rate > 0.0 ? t + rng.exponential(jump_rate) : inf;
    if (std::min(next, death_time) > horizon) {
      t = horizon;
      break;
    }
    if (death_time < next) {
      t = death_time;
      path.killed_at = t;
      path.tau_minus = t;
      break;
    }
    t = next;
    double u = rng.uniform() * jump_rate;
    const Jump* picked = &jumps.jumps.back();
    for (const Jump& j : jumps.jumps) {
      if (u < j.rate) {
        picked = &j;
        break;
      }
      u -= j.rate;
    }
    lost += picked->size;
    path.events.push_back({t, picked->size});
    // X only moves down at jumps, so this is the only place it can cross 0.
    if (x + c * t - lost < 0.0) {
      path.tau_minus = t;
      break;
    }
  }
  path.final_time = t;
  path.final_position = x + c * t - lost;
  return path;
}

SpineSurvivalEstimate spine_survival_mc(const LevyModel& model, std::optional<double> tilt, double x, double horizon,
                                        std::size_t trials, std::uint64_t seed) {
  if (trials < 100) throw Error(Errc::InvalidArgument, "spine survival estimate needs at least 100 trials");
  const std::optional<double> gamma = tilt ? lundberg_exponent(model, *tilt) : std::nullopt;

  std::size_t survived = 0;
  std::vector<double> margin;
  if (gamma) margin.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng = Rng::substream(seed, i);
    const SpinePath path = simulate_spine(model, tilt, x, horizon, rng);
    const bool alive = !path.tau_minus.has_value();
    if (alive) ++survived;
    if (gamma) margin.push_back(alive ? std::exp(-*gamma * path.final_position) : 0.0);
  }

  SpineSurvivalEstimate out;
  out.survival = frequency_estimate(survived, trials);
  if (gamma) out.lundberg_margin = mean_estimate(margin);
  return out;
}

}  // namespace fragkill
