#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fragkill {

/// Sample mean with its standard error. For frequencies se = sqrt(f(1-f)/n),
/// for general samples se = sd / sqrt(n).
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

McEstimate frequency_estimate(std::size_t hits, std::size_t n);

// Summation runs in index order so the result does not depend on threads.
McEstimate mean_estimate(std::span<const double> samples);

// Linear interpolation between order statistics (type 7). Copies the input.
double quantile(std::span<const double> samples, double q);

inline double median(std::span<const double> samples) { return quantile(samples, 0.5); }

double pooled_se(double se_a, double se_b);

}  // namespace fragkill
