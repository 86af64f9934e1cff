#pragma once

#include <span>
#include <vector>

#include "fragkill/rng.hpp"

namespace fragkill {

inline constexpr double kSumTolerance = 1e-12;

/// Ranked mass fractions s1 >= s2 >= ... > 0 with sum <= 1. Only constructible
/// through validate_mass_partition, so every instance is canonical.
class MassPartition {
 public:
  std::span<const double> parts() const noexcept { return parts_; }
  std::size_t size() const noexcept { return parts_.size(); }
  double sum() const noexcept;
  double operator[](std::size_t i) const noexcept { return parts_[i]; }

  friend bool operator==(const MassPartition&, const MassPartition&) = default;

 private:
  friend MassPartition validate_mass_partition(std::span<const double> raw);
  explicit MassPartition(std::vector<double> parts) : parts_(std::move(parts)) {}

  std::vector<double> parts_;
};

/// Sorts descending (stable for ties), strips zeros, and clamps float noise in
/// (1, 1 + kSumTolerance] off the smallest part.
MassPartition validate_mass_partition(std::span<const double> raw);

struct Atom {
  double weight;  // rate per unit time
  MassPartition partition;
};

/// Finite atomic dislocation measure. Immutable after construction.
class DislocationMeasure {
 public:
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  double rho() const noexcept { return rho_; }
  double kappa() const noexcept { return kappa_; }
  bool conservative() const noexcept { return conservative_; }

  // Largest number of parts among atoms; bounds the children of one split.
  std::size_t max_parts() const noexcept { return max_parts_; }

 private:
  friend DislocationMeasure make_dislocation_measure(std::vector<Atom> atoms);
  DislocationMeasure() = default;

  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;  // running sums of weights, for sampling
  double rho_ = 0.0;
  double kappa_ = 0.0;
  bool conservative_ = true;
  std::size_t max_parts_ = 0;

  friend const Atom& select_atom(const DislocationMeasure& nu, double u);
};

/// Rejects empty measures, non-positive weights, and atoms with fewer than two
/// positive parts (the unit partition and single-block dislocations).
DislocationMeasure make_dislocation_measure(std::vector<Atom> atoms);

// Atom i with probability weight_i / rho, from a uniform u in [0, 1).
const Atom& select_atom(const DislocationMeasure& nu, double u);

const MassPartition& sample_split(const DislocationMeasure& nu, Rng& rng);

}  // namespace fragkill
