#include "fragkill/levy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fragkill/error.hpp"

namespace fragkill {

namespace {

void require_domain(double p, const char* what) {
  if (!(p > kPLower) || !std::isfinite(p)) {
    std::ostringstream msg;
    msg << what << " requires p > -1 (got " << p << ")";
    throw Error(Errc::DomainError, msg.str());
  }
}

double root_residual(const DislocationMeasure& nu, double p) {
  return (p + 1.0) * phi_prime(nu, p) - phi(nu, p);
}

constexpr std::size_t kMaxSeriesTerms = 10000;
constexpr double kSeriesTolerance = 1e-12;

}  // namespace

double phi(const DislocationMeasure& nu, double p) {
  require_domain(p, "phi");
  double total = 0.0;
  for (const Atom& atom : nu.atoms()) {
    double mass = 0.0;
    for (double s : atom.partition.parts()) mass += std::pow(s, 1.0 + p);
    total += atom.weight * (1.0 - mass);
  }
  return total;
}

double phi_prime(const DislocationMeasure& nu, double p) {
  require_domain(p, "phi_prime");
  double total = 0.0;
  for (const Atom& atom : nu.atoms()) {
    double sum = 0.0;
    for (double s : atom.partition.parts()) sum += std::pow(s, 1.0 + p) * -std::log(s);
    total += atom.weight * sum;
  }
  return total;
}

double p_bar(const DislocationMeasure& nu, double tol_root) {
  // g > 0 left of the root and < 0 right of it.
  double hi = 1.0;
  while (root_residual(nu, hi) >= 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw Error(Errc::BracketFailure, "no sign change of (p+1)phi'(p) - phi(p) below p = 1e6");
  }
  double lo = hi / 2.0;
  if (hi == 1.0) {
    lo = 0.0;
    // Strongly dissipative measures can put the root at or left of 0.
    for (int k = 1; root_residual(nu, lo) <= 0.0; ++k) {
      if (k > 30) throw Error(Errc::BracketFailure, "no positive residual found on (-1, 0]");
      lo = -1.0 + std::ldexp(1.0, -k);
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double g = root_residual(nu, mid);
    if (std::abs(g) <= tol_root) return mid;
    (g > 0.0 ? lo : hi) = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  if (std::abs(root_residual(nu, mid)) > tol_root) {
    throw Error(Errc::BracketFailure, "bisection stalled before reaching the residual tolerance");
  }
  return mid;
}

double speed_c_p(const DislocationMeasure& nu, double p) {
  require_domain(p, "speed_c_p");
  return phi(nu, p) / (p + 1.0);
}

LevyModel::LevyModel(double c, DislocationMeasure nu) : LevyModel(c, nu, fragkill::p_bar(nu)) {}

LevyModel::LevyModel(double c, DislocationMeasure nu, double root)
    : c_(c), nu_(std::move(nu)), p_bar_(root), c_p_bar_(speed_c_p(nu_, root)) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(Errc::DomainError, "barrier drift c must be positive");
}

LevyModel LevyModel::with_drift(double c) const { return LevyModel(c, nu_, p_bar_); }

double psi(const LevyModel& model, double p) { return model.c() * p - phi(model.measure(), p); }

double psi_tilted(const LevyModel& model, double p, double lambda) {
  require_domain(p, "psi_tilted");
  require_domain(lambda + p, "psi_tilted (lambda + p)");
  const auto& nu = model.measure();
  return model.c() * lambda - phi(nu, lambda + p) + phi(nu, p);
}

double psi_tilted_slope(const LevyModel& model, double p) {
  return model.c() - phi_prime(model.measure(), p);
}

double JumpMeasure::total_rate() const noexcept {
  double total = 0.0;
  for (const Jump& j : jumps) total += j.rate;
  return total;
}

JumpMeasure tilted_jump_measure(const DislocationMeasure& nu, double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) throw Error(Errc::DomainError, "tilted jump measure requires p >= 0");
  JumpMeasure out;
  for (const Atom& atom : nu.atoms()) {
    for (double s : atom.partition.parts()) {
      out.jumps.push_back({atom.weight * std::pow(s, 1.0 + p), -std::log(s)});
    }
  }
  std::stable_sort(out.jumps.begin(), out.jumps.end(),
                   [](const Jump& a, const Jump& b) { return a.size < b.size; });
  std::vector<Jump> merged;
  for (const Jump& j : out.jumps) {
    if (!merged.empty() && std::abs(merged.back().size - j.size) <= 1e-12 * j.size) {
      merged.back().rate += j.rate;
    } else {
      merged.push_back(j);
    }
  }
  out.jumps = std::move(merged);
  out.killing = p == 0.0 ? nu.kappa() : 0.0;

  const double expected = nu.rho() - phi(nu, p);
  if (std::abs(out.total_rate() - expected) > 1e-9 * nu.rho()) {
    throw Error(Errc::DomainError, "tilted jump rates do not sum to rho - phi(p)");
  }
  return out;
}

double ScaleTable::interpolate(double x) const noexcept {
  if (x <= 0.0) return x < 0.0 ? 0.0 : values_.front();
  const double pos = x / h_;
  const auto last = values_.size() - 1;
  auto i = static_cast<std::size_t>(pos);
  if (i >= last) return values_.back();
  const double theta = pos - static_cast<double>(i);
  return values_[i] + theta * (values_[i + 1] - values_[i]);
}

double ScaleTable::operator()(double x) const {
  if (x > x_max() * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "scale table covers [0, " << x_max() << "], queried at " << x;
    throw Error(Errc::GridRange, msg.str());
  }
  return interpolate(x);
}

ScaleTable::Lookup ScaleTable::lookup(double x) const noexcept {
  if (x > x_max() * (1.0 + 1e-12)) return {asymptote_, true};
  return {interpolate(x), false};
}

ScaleTable scale_function(const LevyModel& model, double p, double h, double x_max) {
  const double slope = psi_tilted_slope(model, p);
  if (!(slope > 0.0)) {
    std::ostringstream msg;
    msg << "scale function needs c > phi'(p): c = " << model.c() << ", phi'(" << p
        << ") = " << phi_prime(model.measure(), p);
    throw Error(Errc::DriftTooSmall, msg.str());
  }
  if (!(h > 0.0) || !(x_max >= h) || !std::isfinite(x_max)) {
    throw Error(Errc::InvalidArgument, "scale grid needs h > 0 and x_max >= h");
  }

  // psi_p(0) = 0, so the tilted process is never killed and the kernel is the
  // jump tail alone, for every p including p = 0.
  std::vector<Jump> jumps;
  if (p >= 0.0) {
    jumps = tilted_jump_measure(model.measure(), p).jumps;
  } else {
    for (const Atom& atom : model.measure().atoms()) {
      for (double s : atom.partition.parts()) jumps.push_back({atom.weight * std::pow(s, 1.0 + p), -std::log(s)});
    }
  }

  const double c = model.c();
  const auto nodes = static_cast<std::size_t>(std::ceil(x_max / h - 1e-9)) + 1;

  ScaleTable table;
  table.p_ = p;
  table.c_ = c;
  table.h_ = h;
  table.asymptote_ = 1.0 / slope;

  std::vector<double> term(nodes, 1.0 / c);
  std::vector<double> total(term);
  std::vector<double> cumulative(nodes, 0.0);
  std::vector<double> next(nodes, 0.0);

  // Integral of the piecewise-linear interpolant of `term` from 0 to z.
  auto integral_to = [&](double z) {
    if (z <= 0.0) return 0.0;
    const double pos = z / h;
    auto i = static_cast<std::size_t>(pos);
    if (i >= nodes - 1) return cumulative[nodes - 1];
    const double theta = pos - static_cast<double>(i);
    return cumulative[i] + h * theta * (term[i] + 0.5 * theta * (term[i + 1] - term[i]));
  };

  double kernel_mass = 0.0;
  for (const Jump& j : jumps) kernel_mass += j.rate;
  // Terms grow while n < kernel_mass * x_max / c; only stop past that mode.
  const double mode = kernel_mass * h * static_cast<double>(nodes - 1) / c;

  std::size_t n = 0;
  for (;;) {
    cumulative[0] = 0.0;
    for (std::size_t k = 1; k < nodes; ++k) cumulative[k] = cumulative[k - 1] + 0.5 * h * (term[k - 1] + term[k]);

    double sup = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
      const double x = h * static_cast<double>(k);
      double acc = 0.0;
      for (const Jump& j : jumps) acc += j.rate * (cumulative[k] - integral_to(x - std::min(x, j.size)));
      next[k] = acc / c;
      sup = std::max(sup, next[k]);
    }
    ++n;
    for (std::size_t k = 0; k < nodes; ++k) total[k] += next[k];
    term.swap(next);

    if (sup < kSeriesTolerance * total.back() && static_cast<double>(n) > mode) break;
    if (n >= kMaxSeriesTerms) {
      throw Error(Errc::NoConvergence, "scale function series did not converge within 10^4 terms");
    }
  }

  if (total.front() != 1.0 / c) throw Error(Errc::NoConvergence, "W_p(0) != 1/c");
  for (std::size_t k = 1; k < nodes; ++k) {
    if (total[k] < total[k - 1] * (1.0 - 1e-12)) {
      throw Error(Errc::NoConvergence, "scale function table is not nondecreasing");
    }
  }
  table.terms_ = n;
  table.values_ = std::move(total);
  return table;
}

double spine_survival_prob(const LevyModel& model, double p, double x, const ScaleTable* table) {
  const double slope = psi_tilted_slope(model, p);
  if (!(slope > 0.0)) return 0.0;
  if (table == nullptr) throw Error(Errc::InvalidArgument, "spine survival needs a scale table when c > phi'(p)");
  if (std::abs(table->p() - p) > 1e-12 || table->drift() != model.c()) {
    throw Error(Errc::InvalidArgument, "scale table was built for a different (c, p)");
  }
  if (x < 0.0) return 0.0;
  return std::clamp(slope * (*table)(x), 0.0, 1.0);
}

std::optional<double> lundberg_exponent(const LevyModel& model, double p) {
  if (!(psi_tilted_slope(model, p) > 0.0)) return std::nullopt;
  const double gamma_max = p - kPLower;
  auto f = [&](double g) { return psi_tilted(model, p, -g); };
  if (!(f(gamma_max) > 0.0)) return std::nullopt;
  double lo = gamma_max / 2.0;
  for (int k = 0; f(lo) >= 0.0; ++k) {
    if (k > 60) return std::nullopt;
    lo /= 2.0;
  }
  double hi = gamma_max;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace fragkill
