#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fragkill/error.hpp"
#include "fragkill/population.hpp"
#include "support.hpp"

using namespace fragkill;

namespace {

RunOptions options_for(double horizon, std::vector<double> checkpoints, bool snapshots = true) {
  RunOptions o;
  o.horizon = horizon;
  o.checkpoints = std::move(checkpoints);
  o.keep_snapshots = snapshots;
  return o;
}

std::vector<double> grid(double horizon, int n) {
  std::vector<double> out;
  for (int i = 0; i <= n; ++i) out.push_back(horizon * i / n);
  return out;
}

}  // namespace

TEST_CASE("block counts respect N <= exp(x + ct) and the barrier") {
  const LevyModel model(0.4, fk_test::mixed());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const double x = 0.5 * static_cast<double>(seed % 5);
    const Trajectory tr = run_killed(model, x, options_for(15.0, grid(15.0, 30)), seed);
    REQUIRE(tr.checkpoints.size() == tr.snapshots.size());
    for (std::size_t k = 0; k < tr.checkpoints.size(); ++k) {
      const Checkpoint& cp = tr.checkpoints[k];
      CHECK(static_cast<double>(cp.blocks) <= std::exp(x + model.c() * cp.t) * (1.0 + 1e-12));
      for (double l : tr.snapshots[k].log_masses) CHECK(l >= -(x + model.c() * cp.t));
      CHECK(std::is_sorted(tr.snapshots[k].log_masses.begin(), tr.snapshots[k].log_masses.end()));
    }
  }
}

TEST_CASE("the first checkpoint holds the unit block") {
  const LevyModel model(0.5, fk_test::binary());
  const Trajectory tr = run_killed(model, 1.0, options_for(5.0, {0.0, 5.0}), 3);
  REQUIRE(!tr.checkpoints.empty());
  CHECK(tr.checkpoints[0].blocks == 1);
  CHECK(tr.checkpoints[0].log_lambda1 == 0.0);
  CHECK(tr.checkpoints[0].total_mass == 1.0);
}

TEST_CASE("extinct runs stay empty after zeta") {
  const LevyModel model(0.2, fk_test::binary());
  std::size_t extinct = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Trajectory tr = run_killed(model, 0.0, options_for(30.0, grid(30.0, 60), false), seed);
    if (!tr.extinct) continue;
    ++extinct;
    REQUIRE(tr.zeta.has_value());
    CHECK(tr.checkpoints.size() == 61);
    for (const Checkpoint& cp : tr.checkpoints) {
      if (cp.t >= *tr.zeta) {
        CHECK(cp.blocks == 0);
        CHECK(std::isinf(cp.log_lambda1));
      }
    }
  }
  CHECK(extinct > 100);
}

TEST_CASE("runs with one seed are coupled in x") {
  const LevyModel model(0.45, fk_test::mixed());
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const RunOptions o = options_for(8.0, {2.0, 4.0, 8.0});
    const Trajectory lo = run_killed(model, 0.5, o, seed);
    const Trajectory hi = run_killed(model, 1.5, o, seed);
    REQUIRE(lo.snapshots.size() == hi.snapshots.size());
    for (std::size_t k = 0; k < lo.snapshots.size(); ++k) {
      const auto& a = lo.snapshots[k].log_masses;
      const auto& b = hi.snapshots[k].log_masses;
      CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
    if (hi.extinct) {
      REQUIRE(lo.extinct);
      CHECK(*lo.zeta <= *hi.zeta);
    }
  }
}

TEST_CASE("identical seeds give identical trajectories") {
  const LevyModel model(0.5, fk_test::mixed());
  const RunOptions o = options_for(10.0, grid(10.0, 10));
  const Trajectory a = run_killed(model, 1.0, o, 42);
  const Trajectory b = run_killed(model, 1.0, o, 42);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) CHECK(a.snapshots[k].log_masses == b.snapshots[k].log_masses);
  CHECK(a.events == b.events);
  const Trajectory c = run_killed(model, 1.0, o, 43);
  CHECK(c.events != a.events);
}

TEST_CASE("unkilled conservative chains keep unit mass") {
  const DislocationMeasure nu = fk_test::binary();
  const Trajectory tr = run_unkilled(nu, 0.0, options_for(6.0, grid(6.0, 6), false), 9);
  for (const Checkpoint& cp : tr.checkpoints) {
    CHECK(cp.total_mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cp.dropped_mass == 0.0);
  }
}

TEST_CASE("the floor accounts for the mass it drops") {
  const DislocationMeasure nu = fk_test::binary();
  const Trajectory tr = run_unkilled(nu, 1e-3, options_for(20.0, grid(20.0, 4), false), 9);
  for (const Checkpoint& cp : tr.checkpoints) {
    CHECK(cp.total_mass + cp.dropped_mass == doctest::Approx(1.0).epsilon(1e-12));
    if (cp.blocks > 0) CHECK(cp.log_lambda1 >= std::log(1e-3));
  }
  CHECK(tr.checkpoints.back().dropped_mass > 0.0);
  CHECK_THROWS_AS(run_unkilled(nu, 1.0, options_for(1.0, {}), 1), Error);
  CHECK_THROWS_AS(run_unkilled(nu, -0.1, options_for(1.0, {}), 1), Error);
}

TEST_CASE("pruning removes whole lines and accounts for their mass") {
  const DislocationMeasure nu = fk_test::binary();
  RunOptions pruned = options_for(12.0, grid(12.0, 12), true);
  pruned.caps.prune_window = 3.0;
  const RunOptions exact = options_for(12.0, grid(12.0, 12), true);
  const Trajectory a = run_unkilled(nu, 0.0, pruned, 5);
  const Trajectory b = run_unkilled(nu, 0.0, exact, 5);
  for (std::size_t k = 0; k < a.checkpoints.size(); ++k) {
    // Blocks are keyed by lineage, so the pruned population is a sub-population.
    const auto& kept = a.snapshots[k].log_masses;
    const auto& all = b.snapshots[k].log_masses;
    CHECK(std::includes(all.begin(), all.end(), kept.begin(), kept.end()));
    CHECK(a.checkpoints[k].log_lambda1 <= b.checkpoints[k].log_lambda1);
    CHECK(a.checkpoints[k].total_mass + a.checkpoints[k].dropped_mass == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(a.checkpoints.back().dropped_mass > 0.0);
}

TEST_CASE("capped runs stop and record no further checkpoints") {
  const DislocationMeasure nu = fk_test::binary();
  RunOptions o = options_for(30.0, grid(30.0, 30), false);
  o.caps.max_blocks = 50;
  const Trajectory tr = run_unkilled(nu, 0.0, o, 4);
  CHECK(tr.capped);
  REQUIRE(tr.capped_at.has_value());
  CHECK(tr.checkpoints.size() < 31);
  for (const Checkpoint& cp : tr.checkpoints) CHECK(cp.t < *tr.capped_at);
  CHECK_FALSE(tr.extinct);
}

TEST_CASE("run options are validated") {
  const LevyModel model(0.5, fk_test::binary());
  CHECK_THROWS_AS(run_killed(model, 0.0, options_for(0.0, {}), 1), Error);
  CHECK_THROWS_AS(run_killed(model, 0.0, options_for(1.0, {0.5, 0.2}), 1), Error);
  CHECK_THROWS_AS(run_killed(model, 0.0, options_for(1.0, {2.0}), 1), Error);
  CHECK_THROWS_AS(run_killed(model, -1.0, options_for(1.0, {}), 1), Error);
}
