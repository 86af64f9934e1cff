#include "fragkill/population.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fragkill/error.hpp"
#include "fragkill/rng.hpp"

namespace fragkill {

namespace {

constexpr std::uint64_t kRootId = 1;

struct Pending {
  Block block;
  Rng rng;  // the block's own stream, positioned after its clock draw
};

struct Later {
  bool operator()(const Pending& a, const Pending& b) const noexcept {
    if (a.block.next_split != b.block.next_split) return a.block.next_split > b.block.next_split;
    return a.block.id > b.block.id;
  }
};

struct Barrier {
  bool active = false;
  double x = 0.0;
  double c = 0.0;
  double log_floor = -std::numeric_limits<double>::infinity();
};

void validate(const RunOptions& options) {
  if (!(options.horizon > 0.0) || !std::isfinite(options.horizon)) {
    throw Error(Errc::InvalidArgument, "horizon must be positive and finite");
  }
  if (options.caps.max_blocks < 1) throw Error(Errc::InvalidArgument, "caps.max_blocks must be >= 1");
  if (!(options.caps.prune_window > 0.0)) throw Error(Errc::InvalidArgument, "prune window must be positive");
  double prev = -1.0;
  for (double t : options.checkpoints) {
    if (!(t >= 0.0) || t > options.horizon || t < prev) {
      throw Error(Errc::InvalidArgument, "checkpoints must be ascending and inside [0, horizon]");
    }
    prev = t;
  }
}

Pending make_block(std::uint64_t seed, std::uint64_t id, std::uint64_t parent, double log_mass, double birth,
                   double rho) {
  Pending p{{id, parent, log_mass, birth, 0.0}, Rng::substream(seed, id)};
  p.block.next_split = birth + p.rng.exponential(rho);
  return p;
}

Trajectory run_chain(const DislocationMeasure& nu, const Barrier& barrier, const RunOptions& options,
                     std::uint64_t seed) {
  validate(options);
  const double rho = nu.rho();
  const double window = options.caps.prune_window;
  const bool pruning = std::isfinite(window);

  Trajectory out;
  std::vector<Pending> heap;
  std::multiset<double> masses;  // only maintained while pruning
  double dropped = 0.0;

  auto record = [&](double t) {
    Checkpoint cp;
    cp.t = t;
    cp.blocks = heap.size();
    cp.dropped_mass = dropped;
    std::vector<double> logs;
    logs.reserve(heap.size());
    for (const Pending& p : heap) logs.push_back(p.block.log_mass);
    std::sort(logs.begin(), logs.end());
    if (!logs.empty()) cp.log_lambda1 = logs.back();
    for (double l : logs) cp.total_mass += std::exp(l);
    out.checkpoints.push_back(cp);
    if (options.keep_snapshots) out.snapshots.push_back({t, std::move(logs)});
  };

  heap.push_back(make_block(seed, kRootId, 0, 0.0, 0.0, rho));
  if (pruning) masses.insert(0.0);
  out.peak_blocks = 1;

  std::vector<Pending> children;
  children.reserve(nu.max_parts());
  std::size_t next_cp = 0;
  const auto& cps = options.checkpoints;

  for (;;) {
    const double s = heap.empty() ? std::numeric_limits<double>::infinity() : heap.front().block.next_split;
    while (next_cp < cps.size() && cps[next_cp] < s) record(cps[next_cp++]);
    if (heap.empty() || s > options.horizon) break;

    std::pop_heap(heap.begin(), heap.end(), Later{});
    Pending parent = heap.back();
    heap.pop_back();
    ++out.events;
    if (pruning) masses.erase(masses.find(parent.block.log_mass));

    const MassPartition& split = sample_split(nu, parent.rng);
    const double killing_line = barrier.active ? -(barrier.x + barrier.c * s) : -std::numeric_limits<double>::infinity();
    children.clear();
    for (std::size_t i = 0; i < split.size(); ++i) {
      const double l = parent.block.log_mass + std::log(split[i]);
      if (l < killing_line) continue;  // killed at creation
      if (l < barrier.log_floor) {
        dropped += std::exp(l);
        continue;
      }
      children.push_back(make_block(seed, derive_key(parent.block.id, i + 1), parent.block.id, l, s, rho));
    }
    if (pruning && !children.empty()) {
      double top = masses.empty() ? -std::numeric_limits<double>::infinity() : *masses.rbegin();
      for (const Pending& c : children) top = std::max(top, c.block.log_mass);
      std::erase_if(children, [&](const Pending& c) {
        if (c.block.log_mass >= top - window) return false;
        dropped += std::exp(c.block.log_mass);
        return true;
      });
    }
    for (Pending& c : children) {
      if (pruning) masses.insert(c.block.log_mass);
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), Later{});
    }
    out.peak_blocks = std::max(out.peak_blocks, heap.size());

    if (heap.empty()) {
      out.extinct = true;
      out.zeta = s;
      while (next_cp < cps.size()) record(cps[next_cp++]);
      break;
    }
    if (heap.size() > options.caps.max_blocks) {
      out.capped = true;
      out.capped_at = s;
      break;
    }
  }
  return out;
}

}  // namespace

Trajectory run_killed(const LevyModel& model, double x, const RunOptions& options, std::uint64_t seed) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw Error(Errc::InvalidArgument, "barrier offset x must be >= 0");
  Barrier barrier;
  barrier.active = true;
  barrier.x = x;
  barrier.c = model.c();
  return run_chain(model.measure(), barrier, options, seed);
}

Trajectory run_unkilled(const DislocationMeasure& nu, double floor_eps, const RunOptions& options,
                        std::uint64_t seed) {
  if (!(floor_eps >= 0.0) || floor_eps >= 1.0) throw Error(Errc::InvalidArgument, "floor_eps must lie in [0, 1)");
  Barrier barrier;
  if (floor_eps > 0.0) barrier.log_floor = std::log(floor_eps);
  return run_chain(nu, barrier, options, seed);
}

}  // namespace fragkill
