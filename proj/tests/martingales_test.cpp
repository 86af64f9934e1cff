#include <doctest.h>

#include <cmath>
#include <vector>

#include "fragkill/error.hpp"
#include "fragkill/martingales.hpp"
#include "support.hpp"

using namespace fragkill;

TEST_CASE("function tables interpolate linearly and hold their ends") {
  const FunctionTable f({0.0, 1.0, 3.0}, {1.0, 0.5, 0.1}, 1.0, 0.0);
  CHECK(f(0.0) == 1.0);
  CHECK(f(0.5) == doctest::Approx(0.75));
  CHECK(f(2.0) == doctest::Approx(0.3));
  CHECK(f(3.0) == doctest::Approx(0.1));
  CHECK(f(-1.0) == 1.0);
  CHECK(f(4.0) == 0.0);
  CHECK_THROWS_AS(FunctionTable({0.0, 0.0}, {1.0, 1.0}, 1.0, 1.0), Error);
  CHECK_THROWS_AS(FunctionTable({0.0, 1.0}, {1.0, 1.5}, 1.0, 1.0), Error);
  CHECK_THROWS_AS(FunctionTable({0.0, 1.0}, {1.0}, 1.0, 1.0), Error);
}

TEST_CASE("isotonic fit pools adjacent violators") {
  const std::vector<double> y{0.2, 0.5, 0.1};
  const std::vector<double> w{1.0, 1.0, 1.0};
  const std::vector<double> fit = isotonic_nonincreasing(y, w);
  CHECK(fit[0] == doctest::Approx(0.35));
  CHECK(fit[1] == doctest::Approx(0.35));
  CHECK(fit[2] == doctest::Approx(0.1));

  const std::vector<double> y2{0.9, 0.3, 0.4, 0.5, 0.1};
  const std::vector<double> w2{1.0, 1.0, 1.0, 2.0, 1.0};
  const std::vector<double> fit2 = isotonic_nonincreasing(y2, w2);
  CHECK(fit2[0] == doctest::Approx(0.9));
  for (int i = 1; i <= 3; ++i) CHECK(fit2[i] == doctest::Approx((0.3 + 0.4 + 1.0) / 4.0));
  CHECK(fit2[4] == doctest::Approx(0.1));

  // Already monotone input is returned unchanged, and the weighted mean is kept.
  const std::vector<double> y3{0.8, 0.6, 0.6, 0.2};
  CHECK(isotonic_nonincreasing(y3, std::vector<double>(4, 1.0)) == y3);
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < y2.size(); ++i) {
    before += w2[i] * y2[i];
    after += w2[i] * fit2[i];
  }
  CHECK(after == doctest::Approx(before));
}

TEST_CASE("interpolation error measures the curvature of the curve") {
  ExtinctionCurve curve;
  curve.x_grid = {0.0, 1.0, 2.0};
  curve.g_iso = {0.8, 0.6, 0.4};
  CHECK(curve.interpolation_error() == doctest::Approx(0.0).epsilon(1e-15));
  curve.g_iso = {0.8, 0.4, 0.2};
  CHECK(curve.interpolation_error() == doctest::Approx(0.1));
  const FunctionTable t = curve.as_table();
  CHECK(t(-1.0) == 0.8);
  CHECK(t(5.0) == 0.2);
}

TEST_CASE("additive martingales on hand-built snapshots") {
  const DislocationMeasure nu = fk_test::binary();
  const LevyModel model(0.5175932641615144, nu);

  const Snapshot root{0.0, {0.0}};
  CHECK(additive_intrinsic(root, nu, 1.0) == 1.0);
  const Snapshot halves{1.0, {std::log(0.5), std::log(0.5)}};
  CHECK(additive_intrinsic(halves, nu, 1.0) == doctest::Approx(0.5 * std::exp(phi(nu, 1.0))));

  const ScaleTable w = scale_function(model, 1.0, 0.005, 3.0);
  CHECK(additive_killed(root, model, 1.0, w, 1.0) == doctest::Approx(w(1.0)));
  CHECK(additive_killed(Snapshot{2.0, {}}, model, 1.0, w, 1.0) == 0.0);
  const double shift = 1.0 + model.c();
  CHECK(additive_killed(halves, model, 1.0, w, 1.0) ==
        doctest::Approx(2.0 * w(shift + std::log(0.5)) * 0.25 * std::exp(phi(nu, 1.0))));

  const SandwichReport ok = sandwich_check(halves, model, 1.0, w, 1.0);
  CHECK(ok.holds);
  CHECK(ok.lower == doctest::Approx(0.25 * std::exp(phi(nu, 1.0)) / model.c()));
  CHECK(ok.lower <= ok.value);
}

TEST_CASE("multiplicative martingale is a product over blocks") {
  const LevyModel model(0.5, fk_test::binary());
  const FunctionTable g({0.0, 4.0}, {0.9, 0.1}, 0.9, 0.1);
  CHECK(multiplicative(Snapshot{3.0, {}}, g, model, 1.0) == 1.0);
  const Snapshot s{2.0, {std::log(0.25), std::log(0.5)}};
  const double shift = 1.0 + 0.5 * 2.0;
  CHECK(multiplicative(s, g, model, 1.0) == doctest::Approx(g(shift + std::log(0.25)) * g(shift + std::log(0.5))));
}
