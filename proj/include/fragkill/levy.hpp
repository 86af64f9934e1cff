#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fragkill/measure.hpp"

namespace fragkill {

// Left end of the domain of the Laplace exponent. For finite atomic measures
// the defining integral converges for every p > -1.
inline constexpr double kPLower = -1.0 + 1e-9;
inline constexpr double kRootTolerance = 1e-10;

/// Laplace exponent of the tagged fragment: sum_atoms w * (1 - sum_i s_i^(1+p)).
double phi(const DislocationMeasure& nu, double p);

double phi_prime(const DislocationMeasure& nu, double p);

/// Unique root of (p+1) phi'(p) = phi(p), by bracketing and bisection.
double p_bar(const DislocationMeasure& nu, double tol_root = kRootTolerance);

/// c_p = phi(p) / (p+1).
double speed_c_p(const DislocationMeasure& nu, double p);

/// Barrier drift c together with the measure and its cached spectral data.
class LevyModel {
 public:
  LevyModel(double c, DislocationMeasure nu);

  double c() const noexcept { return c_; }
  const DislocationMeasure& measure() const noexcept { return nu_; }
  double p_lower() const noexcept { return kPLower; }
  double p_bar() const noexcept { return p_bar_; }
  double c_p_bar() const noexcept { return c_p_bar_; }

  // Same measure, different drift. Reuses the cached root.
  LevyModel with_drift(double c) const;

 private:
  LevyModel(double c, DislocationMeasure nu, double p_bar);

  double c_;
  DislocationMeasure nu_;
  double p_bar_;
  double c_p_bar_;
};

/// Laplace exponent of X = ct - xi: psi(p) = c p - phi(p).
double psi(const LevyModel& model, double p);

/// psi_p(lambda) = psi(lambda + p) - psi(p).
double psi_tilted(const LevyModel& model, double p, double lambda);

/// Right derivative of psi_p at 0, i.e. c - phi'(p).
double psi_tilted_slope(const LevyModel& model, double p);

struct Jump {
  double rate;
  double size;  // log-mass decrement -log s_i > 0
};

struct JumpMeasure {
  std::vector<Jump> jumps;  // ascending size, equal sizes merged
  double killing = 0.0;

  double total_rate() const noexcept;
};

/// Jump structure of the tagged fragment's log-mass under the tilted law:
/// atom (w, s) contributes jump -log s_i at rate w s_i^(1+p). At p = 0 the
/// killing rate is kappa (the original law); for p > 0 it vanishes.
JumpMeasure tilted_jump_measure(const DislocationMeasure& nu, double p);

/// Scale function W_p of the tilted process, tabulated on {0, h, ..., x_max}.
class ScaleTable {
 public:
  struct Lookup {
    double value;
    bool beyond;  // x > x_max, value is the asymptote
  };

  double p() const noexcept { return p_; }
  double drift() const noexcept { return c_; }
  double step() const noexcept { return h_; }
  double x_max() const noexcept { return h_ * static_cast<double>(values_.size() - 1); }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t terms() const noexcept { return terms_; }

  // W_p(infinity) = 1 / psi_p'(0+).
  double asymptote() const noexcept { return asymptote_; }

  /// Linear interpolation; 0 for x < 0. Throws GridRange past x_max.
  double operator()(double x) const;

  Lookup lookup(double x) const noexcept;

 private:
  friend ScaleTable scale_function(const LevyModel&, double, double, double);
  ScaleTable() = default;

  double interpolate(double x) const noexcept;

  double p_ = 0.0;
  double c_ = 0.0;
  double h_ = 0.0;
  double asymptote_ = 0.0;
  std::size_t terms_ = 0;
  std::vector<double> values_;
};

/// Convolution series W_p = sum_n c^-(n+1) H_n with H_0 = 1 and
/// H_n = h_p * H_{n-1}, where h_p is the tail of the tilted jump measure. The
/// convolution against the step kernel is integrated exactly over the
/// piecewise-linear (trapezoidal) interpolant of H_{n-1}.
/// Requires c > phi'(p), h > 0 and x_max >= h.
ScaleTable scale_function(const LevyModel& model, double p, double h, double x_max);

/// P^(p)(tau^- = infinity) = max(psi_p'(0+), 0) W_p(x), clamped to [0, 1].
/// The table may be null when psi_p'(0+) <= 0; the answer is then 0.
double spine_survival_prob(const LevyModel& model, double p, double x, const ScaleTable* table);

/// Positive root gamma of psi_p(-gamma) = 0 inside the domain, if any. Gives
/// the Cramer-Lundberg bound P_y(tau^- < infinity) <= exp(-gamma y).
std::optional<double> lundberg_exponent(const LevyModel& model, double p);

}  // namespace fragkill
