#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fragkill/error.hpp"
#include "fragkill/levy.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fragkill;

using fk_test::kLn2;
using fk_test::binary_phi;
using fk_test::binary_phi_prime;
using fk_test::bisect_binary_root;
using fk_test::golden_argmax;
using fk_test::exact_single_jump_scale;
using fk_test::laplace_of_table;

TEST_CASE("phi matches the closed form of the binary measure") {
  const DislocationMeasure nu = fk_test::binary();
  for (double p : {-0.9, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0}) {
    CHECK(phi(nu, p) == doctest::Approx(binary_phi(p)).epsilon(1e-14));
    CHECK(phi_prime(nu, p) == doctest::Approx(binary_phi_prime(p)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(phi(nu, -1.0), Error);
}

TEST_CASE("phi' agrees with central finite differences to 1e-8") {
  for (const DislocationMeasure& nu : {fk_test::binary(), fk_test::dissipative(), fk_test::mixed()}) {
    for (double p : {0.0, 0.5, 1.0, 2.0}) {
      const double h = 1e-5;
      const double fd = (phi(nu, p + h) - phi(nu, p - h)) / (2.0 * h);
      CHECK(std::abs(phi_prime(nu, p) - fd) <= 1e-8 * std::abs(fd));
    }
  }
}

TEST_CASE("phi is nondecreasing and concave on a grid") {
  for (const DislocationMeasure& nu : {fk_test::binary(), fk_test::dissipative(), fk_test::mixed()}) {
    std::vector<double> v;
    for (double p = -0.95; p <= 6.0; p += 0.05) v.push_back(phi(nu, p));
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] >= v[i - 1]);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) CHECK(v[i - 1] + v[i + 1] - 2.0 * v[i] <= 1e-14);
  }
}

TEST_CASE("p_bar agrees with a bisection oracle and the argmax of c_p") {
  const DislocationMeasure nu = fk_test::binary();
  const double root = p_bar(nu);
  CHECK(std::abs(root - bisect_binary_root()) <= 1e-9);
  CHECK(std::abs(root - 1.421342879534) <= 1e-9);
  const double argmax = golden_argmax([&](double p) { return speed_c_p(nu, p); }, 0.0, 10.0);
  CHECK(std::abs(root - argmax) <= 1e-6);
  CHECK(std::abs((root + 1.0) * phi_prime(nu, root) - phi(nu, root)) <= 1e-10);

  const LevyModel model(1.0, nu);
  CHECK(model.p_bar() == root);
  CHECK(model.c_p_bar() == doctest::Approx(0.258796632081).epsilon(1e-11));
}

TEST_CASE("the root separates the sign of (p+1) phi' - phi") {
  for (const DislocationMeasure& nu : {fk_test::binary(), fk_test::dissipative(), fk_test::mixed()}) {
    const LevyModel model(1.0, nu);
    auto g = [&](double p) { return (p + 1.0) * phi_prime(nu, p) - phi(nu, p); };
    for (double p = -0.9; p < model.p_bar() - 1e-3; p += 0.01) CHECK(g(p) > 0.0);
    for (double p = model.p_bar() + 1e-3; p < 20.0; p += 0.05) CHECK(g(p) < 0.0);
    for (double p = -0.9; p < 20.0; p += 0.01) CHECK(speed_c_p(nu, p) <= model.c_p_bar() + 1e-15);
  }
}

TEST_CASE("tilted jumps carry rate rho - phi(p)") {
  const DislocationMeasure nu = fk_test::binary();
  for (double p : {0.0, 0.5, 1.0, 2.0}) {
    const JumpMeasure j = tilted_jump_measure(nu, p);
    REQUIRE(j.jumps.size() == 1);
    CHECK(j.jumps[0].size == doctest::Approx(kLn2));
    CHECK(j.jumps[0].rate == doctest::Approx(std::exp2(-p)));
    CHECK(j.total_rate() == doctest::Approx(nu.rho() - phi(nu, p)));
    CHECK(j.killing == 0.0);
  }
  const DislocationMeasure d = fk_test::dissipative();
  CHECK(tilted_jump_measure(d, 0.0).killing == doctest::Approx(0.25));
  CHECK(tilted_jump_measure(d, 1.0).killing == 0.0);
  for (double p : {0.0, 1.0}) {
    const JumpMeasure j = tilted_jump_measure(d, p);
    CHECK(j.total_rate() == doctest::Approx(d.rho() - phi(d, p)).epsilon(1e-13));
  }
}

TEST_CASE("psi_p vanishes at 0 with slope c - phi'(p)") {
  const LevyModel model(0.6, fk_test::mixed());
  for (double p : {0.0, 0.5, 1.0}) {
    CHECK(psi_tilted(model, p, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    const double h = 1e-6;
    const double fd = (psi_tilted(model, p, h) - psi_tilted(model, p, -h)) / (2.0 * h);
    CHECK(psi_tilted_slope(model, p) == doctest::Approx(fd).epsilon(1e-7));
    CHECK(psi_tilted_slope(model, p) == doctest::Approx(0.6 - phi_prime(model.measure(), p)));
  }
}

TEST_CASE("scale function starts at 1/c and is nondecreasing") {
  const LevyModel model(0.5175932641615144, fk_test::binary());
  for (double p : {0.5, 1.0, 2.0}) {
    const ScaleTable w = scale_function(model, p, 0.005, 5.0);
    CHECK(w.values()[0] == 1.0 / model.c());
    CHECK(w(0.0) == 1.0 / model.c());
    for (std::size_t i = 1; i < w.values().size(); ++i) CHECK(w.values()[i] >= w.values()[i - 1]);
    CHECK(w.values().back() <= w.asymptote() * (1.0 + 1e-9));
  }
}

TEST_CASE("scale function matches the exact single-jump formula") {
  const double c = 0.5175932641615144;
  const LevyModel model(c, fk_test::binary());
  for (double p : {0.5, 1.0}) {
    const ScaleTable w = scale_function(model, p, 0.001, 4.0);
    double worst = 0.0;
    for (double x = 0.0; x <= 4.0; x += 0.0625) {
      const double exact = exact_single_jump_scale(c, std::exp2(-p), kLn2, x);
      worst = std::max(worst, std::abs(w(x) - exact) / exact);
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("Laplace transform of W_p inverts psi_p") {
  const LevyModel model(0.5175932641615144, fk_test::binary());
  const double p = 1.0;
  const ScaleTable w = scale_function(model, p, 0.005, 12.0);
  for (double lam : {2.0, 5.0, 10.0}) {
    CHECK(std::abs(psi_tilted(model, p, lam) * laplace_of_table(w, lam) - 1.0) <= 1e-3);
  }
  const LevyModel mixed(1.2, fk_test::mixed());
  const ScaleTable wm = scale_function(mixed, 0.5, 0.005, 12.0);
  for (double lam : {2.0, 5.0, 10.0}) {
    CHECK(std::abs(psi_tilted(mixed, 0.5, lam) * laplace_of_table(wm, lam) - 1.0) <= 1e-3);
  }
}

TEST_CASE("halving the grid step shrinks the change by at least 0.6") {
  const LevyModel model(0.5175932641615144, fk_test::binary());
  const ScaleTable a = scale_function(model, 1.0, 0.02, 3.0);
  const ScaleTable b = scale_function(model, 1.0, 0.01, 3.0);
  const ScaleTable c = scale_function(model, 1.0, 0.005, 3.0);
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    d1 = std::max(d1, std::abs(a.values()[i] - b.values()[2 * i]));
    d2 = std::max(d2, std::abs(b.values()[2 * i] - c.values()[4 * i]));
  }
  REQUIRE(d1 > 0.0);
  CHECK(d2 / d1 <= 0.6);
}

TEST_CASE("scale function preconditions and range") {
  const LevyModel slow(0.1, fk_test::binary());
  try {
    scale_function(slow, 1.0, 0.01, 1.0);
    FAIL("expected DriftTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DriftTooSmall);
  }
  const LevyModel model(0.6, fk_test::binary());
  CHECK_THROWS_AS(scale_function(model, 1.0, 0.0, 1.0), Error);
  const ScaleTable w = scale_function(model, 1.0, 0.01, 1.0);
  try {
    (void)w(1.5);
    FAIL("expected GridRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GridRange);
  }
  const ScaleTable::Lookup beyond = w.lookup(1.5);
  CHECK(beyond.beyond);
  CHECK(beyond.value == w.asymptote());
  CHECK(w.asymptote() == doctest::Approx(1.0 / psi_tilted_slope(model, 1.0)));
  CHECK_FALSE(w.lookup(0.5).beyond);
  CHECK(w(-0.1) == 0.0);
}

TEST_CASE("spine survival probability rises toward one") {
  const LevyModel model(0.5175932641615144, fk_test::binary());
  const double p = 1.0;
  const ScaleTable w = scale_function(model, p, 0.02, 30.0);
  double prev = 0.0;
  for (double x = 0.0; x <= 30.0; x += 0.5) {
    const double s = spine_survival_prob(model, p, x, &w);
    CHECK(s >= prev - 1e-12);
    CHECK(s <= 1.0);
    prev = s;
  }
  CHECK(prev > 0.999);
  // At x = 0 the survival probability is psi_p'(0+) / c.
  CHECK(spine_survival_prob(model, p, 0.0, &w) == doctest::Approx(psi_tilted_slope(model, p) / model.c()));
  const LevyModel slow(0.2, fk_test::binary());
  CHECK(spine_survival_prob(slow, p, 1.0, nullptr) == 0.0);
}

TEST_CASE("the Lundberg exponent is a root of psi_p(-gamma)") {
  const LevyModel model(0.5175932641615144, fk_test::binary());
  for (double p : {0.5, 1.0}) {
    const auto gamma = lundberg_exponent(model, p);
    REQUIRE(gamma.has_value());
    CHECK(*gamma > 0.0);
    CHECK(std::abs(psi_tilted(model, p, -*gamma)) <= 1e-9);
  }
  CHECK_FALSE(lundberg_exponent(LevyModel(0.2, fk_test::binary()), 1.0).has_value());
}

TEST_CASE("dissipative measures still have a root and a maximal speed") {
  const DislocationMeasure nu = fk_test::dissipative();
  const LevyModel model(1.0, nu);
  CHECK(std::abs((model.p_bar() + 1.0) * phi_prime(nu, model.p_bar()) - phi(nu, model.p_bar())) <= 1e-10);
  CHECK(model.c_p_bar() == doctest::Approx(phi(nu, model.p_bar()) / (1.0 + model.p_bar())));
  CHECK(model.with_drift(2.0).p_bar() == model.p_bar());
  CHECK(model.with_drift(2.0).c() == 2.0);
}
