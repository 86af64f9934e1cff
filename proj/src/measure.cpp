#include "fragkill/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fragkill/error.hpp"

namespace fragkill {

double MassPartition::sum() const noexcept {
  return std::accumulate(parts_.begin(), parts_.end(), 0.0);
}

MassPartition validate_mass_partition(std::span<const double> raw) {
  std::vector<double> parts;
  parts.reserve(raw.size());
  for (double s : raw) {
    if (!std::isfinite(s)) throw Error(Errc::NonFinite, "mass partition contains a non-finite part");
    if (s < 0.0) throw Error(Errc::NegativePart, "mass partition contains a negative part");
    if (s > 0.0) parts.push_back(s);
  }
  std::stable_sort(parts.begin(), parts.end(), std::greater<>());

  double total = std::accumulate(parts.begin(), parts.end(), 0.0);
  if (total > 1.0 + kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "parts sum to " << total << " > 1";
    throw Error(Errc::SumExceedsOne, msg.str());
  }
  if (total > 1.0) {
    parts.back() -= total - 1.0;
    if (parts.back() <= 0.0) parts.pop_back();
  }
  return MassPartition(std::move(parts));
}

DislocationMeasure make_dislocation_measure(std::vector<Atom> atoms) {
  if (atoms.empty()) throw Error(Errc::EmptyMeasure, "dislocation measure has no atoms");

  DislocationMeasure nu;
  double kappa = 0.0;
  for (const Atom& atom : atoms) {
    if (!(atom.weight > 0.0) || !std::isfinite(atom.weight)) {
      throw Error(Errc::NonPositiveWeight, "atom weights must be positive and finite");
    }
    // Covers the unit partition (1) and any partition with s2 = 0.
    if (atom.partition.size() < 2) {
      throw Error(Errc::ForbiddenAtom, "atom must split into at least two positive parts");
    }
    nu.rho_ += atom.weight;
    nu.cumulative_.push_back(nu.rho_);
    kappa += atom.weight * (1.0 - atom.partition.sum());
    nu.max_parts_ = std::max(nu.max_parts_, atom.partition.size());
  }
  nu.kappa_ = std::max(kappa, 0.0);
  nu.conservative_ = nu.kappa_ <= kSumTolerance * nu.rho_;
  if (nu.conservative_) nu.kappa_ = 0.0;
  nu.atoms_ = std::move(atoms);
  return nu;
}

const Atom& select_atom(const DislocationMeasure& nu, double u) {
  const double target = u * nu.rho_;
  auto it = std::upper_bound(nu.cumulative_.begin(), nu.cumulative_.end(), target);
  auto idx = static_cast<std::size_t>(it - nu.cumulative_.begin());
  return nu.atoms_[std::min(idx, nu.atoms_.size() - 1)];
}

const MassPartition& sample_split(const DislocationMeasure& nu, Rng& rng) {
  return select_atom(nu, rng.uniform()).partition;
}

}  // namespace fragkill
