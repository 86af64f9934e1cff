#include "fragkill/martingales.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fragkill/error.hpp"

namespace fragkill {

FunctionTable::FunctionTable(std::vector<double> x, std::vector<double> y, double below, double above)
    : x_(std::move(x)), y_(std::move(y)), below_(below), above_(above) {
  if (x_.empty() || x_.size() != y_.size()) throw Error(Errc::InvalidArgument, "function table needs matching x and y");
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) throw Error(Errc::InvalidArgument, "function table x must be strictly ascending");
  }
  for (double v : y_) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidArgument, "function table values must lie in [0, 1]");
  }
  if (!(below_ >= 0.0 && below_ <= 1.0 && above_ >= 0.0 && above_ <= 1.0)) {
    throw Error(Errc::InvalidArgument, "out-of-range values must lie in [0, 1]");
  }
}

double FunctionTable::operator()(double x) const noexcept {
  if (x < x_.front()) return below_;
  if (x > x_.back()) return above_;
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  if (it == x_.end()) return y_.back();
  const auto i = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double theta = (x - x_[i]) / (x_[i + 1] - x_[i]);
  return y_[i] + theta * (y_[i + 1] - y_[i]);
}

FunctionTable ExtinctionCurve::as_table() const {
  return FunctionTable(x_grid, g_iso, g_iso.front(), g_iso.back());
}

double ExtinctionCurve::interpolation_error() const {
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < x_grid.size(); ++i) {
    const double span = x_grid[i + 1] - x_grid[i - 1];
    const double chord = (g_iso[i - 1] * (x_grid[i + 1] - x_grid[i]) + g_iso[i + 1] * (x_grid[i] - x_grid[i - 1])) / span;
    worst = std::max(worst, std::abs(g_iso[i] - chord));
  }
  return worst;
}

std::vector<double> isotonic_nonincreasing(std::span<const double> y, std::span<const double> weights) {
  if (y.size() != weights.size()) throw Error(Errc::InvalidArgument, "isotonic fit needs one weight per value");
  struct Pool {
    double value;
    double weight;
    std::size_t count;
  };
  std::vector<Pool> pools;
  for (std::size_t i = 0; i < y.size(); ++i) {
    pools.push_back({y[i], std::max(weights[i], 1e-300), 1});
    while (pools.size() > 1 && pools[pools.size() - 2].value < pools.back().value) {
      Pool last = pools.back();
      pools.pop_back();
      Pool& prev = pools.back();
      const double w = prev.weight + last.weight;
      prev.value = (prev.value * prev.weight + last.value * last.weight) / w;
      prev.weight = w;
      prev.count += last.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Pool& p : pools) out.insert(out.end(), p.count, p.value);
  return out;
}

double additive_intrinsic(const Snapshot& snapshot, const DislocationMeasure& nu, double p) {
  const double growth = phi(nu, p) * snapshot.t;
  double sum = 0.0;
  for (double l : snapshot.log_masses) sum += std::exp((1.0 + p) * l + growth);
  return sum;
}

double additive_killed(const Snapshot& snapshot, const LevyModel& model, double p, const ScaleTable& scale,
                       double x) {
  if (snapshot.log_masses.empty()) return 0.0;
  const double growth = phi(model.measure(), p) * snapshot.t;
  const double shift = x + model.c() * snapshot.t;
  std::vector<double> terms;
  terms.reserve(snapshot.log_masses.size());
  for (double l : snapshot.log_masses) terms.push_back(scale(shift + l) * std::exp((1.0 + p) * l + growth));
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double v : terms) sum += v;
  return sum;
}

double multiplicative(const Snapshot& snapshot, const FunctionTable& f, const LevyModel& model, double x) {
  const double shift = x + model.c() * snapshot.t;
  double product = 1.0;
  for (double l : snapshot.log_masses) product *= f(shift + l);
  return product;
}

SandwichReport sandwich_check(const Snapshot& snapshot, const LevyModel& model, double p, const ScaleTable& scale,
                              double x) {
  SandwichReport report;
  report.value = additive_killed(snapshot, model, p, scale, x);
  if (snapshot.log_masses.empty()) return report;
  const double growth = phi(model.measure(), p) * snapshot.t;
  report.lower = std::exp((1.0 + p) * snapshot.log_masses.back() + growth) / model.c();
  if (report.lower > report.value * (1.0 + 1e-9)) {
    report.holds = false;
    std::ostringstream msg;
    msg.precision(17);
    msg << "lower bound " << report.lower << " exceeds M^x_t(p) = " << report.value << " at t = " << snapshot.t;
    report.detail = msg.str();
  }
  return report;
}

}  // namespace fragkill
