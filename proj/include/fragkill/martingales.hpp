#pragma once

#include <span>
#include <string>
#include <vector>

#include "fragkill/levy.hpp"
#include "fragkill/population.hpp"
#include "fragkill/stats.hpp"

namespace fragkill {

/// Grid function with linear interpolation and declared values outside the
/// grid. Used for f in the multiplicative martingale.
class FunctionTable {
 public:
  FunctionTable(std::vector<double> x, std::vector<double> y, double below, double above);

  double operator()(double x) const noexcept;

  std::span<const double> x() const noexcept { return x_; }
  std::span<const double> y() const noexcept { return y_; }
  double below() const noexcept { return below_; }
  double above() const noexcept { return above_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  double below_;
  double above_;
};

/// Estimated P(zeta^x < infinity) over an x grid. g_hat is the raw
/// extinct-by-horizon frequency; g_iso is its nonincreasing (PAVA) fit.
struct ExtinctionCurve {
  std::vector<double> x_grid;
  std::vector<McEstimate> g_hat;
  std::vector<double> g_iso;
  double horizon = 0.0;

  /// Isotonic curve as a table; beyond the grid it holds the last value.
  FunctionTable as_table() const;

  /// Declared interpolation error: the largest deviation of an interior node
  /// from the chord through its neighbours.
  double interpolation_error() const;
};

/// Weighted pool-adjacent-violators fit, nonincreasing.
std::vector<double> isotonic_nonincreasing(std::span<const double> y, std::span<const double> weights);

/// M_t(p) = e^{phi(p) t} sum |block|^{1+p}.
double additive_intrinsic(const Snapshot& snapshot, const DislocationMeasure& nu, double p);

/// M^x_t(p) = e^{phi(p) t} sum W_p(x + ct + log|block|) |block|^{1+p}.
/// Throws GridRange when the scale table does not reach x + ct.
double additive_killed(const Snapshot& snapshot, const LevyModel& model, double p, const ScaleTable& scale,
                       double x);

/// Z^{x,f}_t = prod f(x + ct + log|block|); 1 on an empty snapshot.
double multiplicative(const Snapshot& snapshot, const FunctionTable& f, const LevyModel& model, double x);

struct SandwichReport {
  bool holds = true;
  double lower = 0.0;  // c^-1 e^{phi(p) t} lambda_1^{1+p}
  double value = 0.0;  // M^x_t(p)
  std::string detail;
};

/// Checks c^-1 e^{phi(p)t} lambda_1^{1+p} <= M^x_t(p) to 1e-9 relative.
SandwichReport sandwich_check(const Snapshot& snapshot, const LevyModel& model, double p, const ScaleTable& scale,
                              double x);

}  // namespace fragkill
