#pragma once

#include <vector>

#include "fragkill/measure.hpp"

namespace fk_test {

inline fragkill::Atom atom(double w, std::vector<double> s) {
  return fragkill::Atom{w, fragkill::validate_mass_partition(s)};
}

// nu = delta_(1/2, 1/2): phi(p) = 1 - 2^-p.
inline fragkill::DislocationMeasure binary() { return fragkill::make_dislocation_measure({atom(1.0, {0.5, 0.5})}); }

// nu = delta_(1/2, 1/4): kappa = 1/4.
inline fragkill::DislocationMeasure dissipative() {
  return fragkill::make_dislocation_measure({atom(1.0, {0.5, 0.25})});
}

inline fragkill::DislocationMeasure mixed() {
  return fragkill::make_dislocation_measure({atom(0.7, {0.6, 0.3}), atom(1.3, {0.4, 0.3, 0.2}), atom(0.5, {0.8, 0.1})});
}

}  // namespace fk_test
