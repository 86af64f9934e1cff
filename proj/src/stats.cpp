#include "fragkill/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fragkill {

McEstimate frequency_estimate(std::size_t hits, std::size_t n) {
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0, 0};
  const double f = static_cast<double>(hits) / static_cast<double>(n);
  return {f, std::sqrt(f * (1.0 - f) / static_cast<double>(n)), n};
}

McEstimate mean_estimate(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0, 0};
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(n);
  if (n == 1) return {mean, 0.0, 1};
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, sd / std::sqrt(static_cast<double>(n)), n};
}

double quantile(std::span<const double> samples, double q) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

double pooled_se(double se_a, double se_b) { return std::sqrt(se_a * se_a + se_b * se_b); }

}  // namespace fragkill
