#include "fragkill/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "fragkill/error.hpp"
#include "fragkill/rng.hpp"
#include "fragkill/spine.hpp"

namespace fragkill {

namespace {

// Sub-experiment stream tags for trial_seed.
enum Stream : std::uint64_t {
  kExtinction = 1,
  kDecayKilled = 2,
  kDecayBaseline = 3,
  kGrowth = 4,
  kManyToOnePopulation = 5,
  kManyToOneSpine = 6,
  kSpineSurvival = 7,
  kMartingaleUnkilled = 8,
  kMartingaleKilled = 9,
  kMartingaleCurve = 10,
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

Check make_check(std::string name, bool passed, std::string detail, bool hard = true) {
  return Check{std::move(name), passed, hard, std::move(detail)};
}

void require_trials(const ExperimentConfig& cfg) {
  if (cfg.trials < 100) throw Error(Errc::InvalidArgument, "trials must be >= 100");
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) throw Error(Errc::InvalidArgument, "horizon must be positive");
  for (double x : cfg.x_values) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(Errc::InvalidArgument, "x values must be finite and >= 0");
  }
}

void require_supercritical(const ExperimentConfig& cfg, const char* what) {
  if (speed_regime(cfg.model) != SpeedRegime::Supercritical) {
    std::ostringstream msg;
    msg << what << " requires c > c_pbar (c = " << cfg.model.c() << ", c_pbar = " << cfg.model.c_p_bar() << ")";
    throw Error(Errc::InvalidArgument, msg.str());
  }
}

double rate_of(double log_lambda1, double t) { return -log_lambda1 / t; }

}  // namespace

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index) {
  return derive_key(derive_key(master_seed, stream), index);
}

std::string Functional::name() const {
  return kind == Kind::ConstantOne ? "constant_one" : "indicator_mass_above";
}

bool all_hard_passed(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed || !c.hard; });
}

SpeedRegime speed_regime(const LevyModel& model) {
  const double target = model.c_p_bar();
  if (std::abs(model.c() - target) <= 1e-9 * target) return SpeedRegime::Critical;
  return model.c() < target ? SpeedRegime::Subcritical : SpeedRegime::Supercritical;
}

// ---------------------------------------------------------------------------
// Extinction

ExtinctionReport estimate_extinction(const ExperimentConfig& cfg) {
  require_trials(cfg);
  if (cfg.x_values.empty()) throw Error(Errc::InvalidArgument, "extinction needs at least one x");
  const double horizon = cfg.horizon;
  const std::size_t nx = cfg.x_values.size();
  const std::size_t trials = cfg.trials;

  RunOptions options;
  options.horizon = 2.0 * horizon;
  options.caps = cfg.caps;

  // 0 = alive at 2T, 1 = extinct in (T, 2T], 2 = extinct by T, 3 = capped
  std::vector<unsigned char> outcome(nx * trials, 0);
  parallel_for(trials, cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = trial_seed(cfg.master_seed, kExtinction, i);
    for (std::size_t j = 0; j < nx; ++j) {
      const Trajectory tr = run_killed(cfg.model, cfg.x_values[j], options, seed);
      unsigned char code = 0;
      if (tr.capped) {
        code = 3;
      } else if (tr.extinct) {
        code = *tr.zeta <= horizon ? 2 : 1;
      }
      outcome[j * trials + i] = code;
    }
  });

  ExtinctionReport report;
  report.regime = speed_regime(cfg.model);
  report.curve.x_grid = cfg.x_values;
  report.curve.horizon = horizon;
  for (std::size_t j = 0; j < nx; ++j) {
    std::size_t by_t = 0, by_2t = 0, capped = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      const unsigned char code = outcome[j * trials + i];
      by_t += code == 2;
      by_2t += code == 1 || code == 2;
      capped += code == 3;
    }
    report.curve.g_hat.push_back(frequency_estimate(by_t, trials));
    report.doubled.push_back(frequency_estimate(by_2t, trials));
    report.capped.push_back(capped);
  }
  std::vector<double> raw, weights(nx, static_cast<double>(trials));
  for (const McEstimate& e : report.curve.g_hat) raw.push_back(e.mean);
  report.curve.g_iso = isotonic_nonincreasing(raw, weights);

  const auto first = static_cast<std::size_t>(std::min_element(cfg.x_values.begin(), cfg.x_values.end()) - cfg.x_values.begin());
  report.cap_bias_bound = std::pow(report.curve.g_hat[first].mean, static_cast<double>(cfg.caps.max_blocks));

  auto& checks = report.checks;
  for (std::size_t j = 0; j < nx; ++j) {
    const bool monotone = report.doubled[j].mean >= report.curve.g_hat[j].mean;
    checks.push_back(make_check("horizon_doubling_nondecreasing_x=" + fmt(cfg.x_values[j]), monotone,
                                "extinct by T " + fmt(report.curve.g_hat[j].mean) + ", by 2T " +
                                    fmt(report.doubled[j].mean),
                                report.regime == SpeedRegime::Subcritical));
  }
  switch (report.regime) {
    case SpeedRegime::Subcritical: {
      const double f = report.curve.g_hat[first].mean;
      checks.push_back(make_check("subcritical_extinct_by_T_ge_0.95", f >= 0.95,
                                  "x = " + fmt(cfg.x_values[first]) + ", frequency " + fmt(f)));
      break;
    }
    case SpeedRegime::Supercritical: {
      for (std::size_t j = 0; j < nx; ++j) {
        const auto& interior = cfg.interior_x;
        if (!interior.empty() && std::find(interior.begin(), interior.end(), cfg.x_values[j]) == interior.end()) continue;
        const double f = report.curve.g_hat[j].mean;
        checks.push_back(make_check("supercritical_frequency_in_(0.01,0.99)_x=" + fmt(cfg.x_values[j]),
                                    f > 0.01 && f < 0.99, "frequency " + fmt(f)));
      }
      bool ok = true;
      std::string detail = "max excess over 2 pooled SE: ";
      double worst = -std::numeric_limits<double>::infinity();
      std::vector<std::size_t> order(nx);
      for (std::size_t j = 0; j < nx; ++j) order[j] = j;
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cfg.x_values[a] < cfg.x_values[b]; });
      for (std::size_t k = 1; k < nx; ++k) {
        const McEstimate& lo = report.curve.g_hat[order[k - 1]];
        const McEstimate& hi = report.curve.g_hat[order[k]];
        const double excess = hi.mean - lo.mean - 2.0 * pooled_se(lo.se, hi.se);
        worst = std::max(worst, excess);
        if (excess > 0.0) ok = false;
      }
      checks.push_back(make_check("nonincreasing_in_x_within_2SE", ok, detail + fmt(nx > 1 ? worst : 0.0)));
      break;
    }
    case SpeedRegime::Critical:
      checks.push_back(make_check("critical_speed_exploratory", true, "no threshold at c = c_pbar", false));
      break;
  }
  std::size_t capped_total = 0;
  for (auto c : report.capped) capped_total += c;
  checks.push_back(make_check("capped_runs_counted_as_surviving", true,
                              std::to_string(capped_total) + " capped, bias bound " + fmt(report.cap_bias_bound),
                              false));
  return report;
}

// ---------------------------------------------------------------------------
// Decay rate of the largest fragment

DecayReport estimate_decay_rate(const ExperimentConfig& cfg) {
  require_supercritical(cfg, "decay experiment");
  if (!(cfg.horizon > 0.0)) throw Error(Errc::InvalidArgument, "horizon must be positive");
  if (cfg.batches == 0 || cfg.trials == 0) throw Error(Errc::InvalidArgument, "decay needs batches and trials");
  const double horizon = cfg.horizon;
  const double x = cfg.x_values.empty() ? 0.0 : cfg.x_values.front();

  RunOptions options;
  options.horizon = 2.0 * horizon;
  options.checkpoints = {horizon, 2.0 * horizon};
  options.caps = cfg.caps;

  struct Outcome {
    bool survived = false;
    bool capped = false;
    double rate_t = 0.0;
    double rate_2t = 0.0;
  };
  const std::size_t total = cfg.batches * cfg.trials;
  std::vector<Outcome> outcomes(total);
  parallel_for(total, cfg.threads, [&](std::size_t i) {
    const Trajectory tr = run_killed(cfg.model, x, options, trial_seed(cfg.master_seed, kDecayKilled, i));
    Outcome& o = outcomes[i];
    if (tr.extinct) return;
    o.survived = true;
    if (tr.capped) {
      o.capped = true;
      return;
    }
    o.rate_t = rate_of(tr.checkpoints[0].log_lambda1, horizon);
    o.rate_2t = rate_of(tr.checkpoints[1].log_lambda1, 2.0 * horizon);
  });

  std::vector<double> baseline(cfg.baseline_seeds);
  parallel_for(cfg.baseline_seeds, cfg.threads, [&](std::size_t s) {
    const Trajectory tr = run_unkilled(cfg.model.measure(), 0.0, options, trial_seed(cfg.master_seed, kDecayBaseline, s));
    if (tr.capped) throw Error(Errc::CapExceeded, "unkilled baseline hit caps.max_blocks; lower caps.prune_window");
    baseline[s] = rate_of(tr.checkpoints[1].log_lambda1, 2.0 * horizon);
  });

  DecayReport report;
  report.target = cfg.model.c_p_bar();
  report.baseline_2t = baseline;
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    std::vector<double> rt, r2t;
    for (std::size_t k = 0; k < cfg.trials; ++k) {
      const Outcome& o = outcomes[b * cfg.trials + k];
      if (o.capped) ++report.capped;
      if (!o.survived || o.capped) continue;
      rt.push_back(o.rate_t);
      r2t.push_back(o.rate_2t);
    }
    DecayBatch batch;
    batch.survivors = rt.size();
    if (!rt.empty()) {
      batch.median_t = median(rt);
      batch.median_2t = median(r2t);
    }
    report.batches.push_back(batch);
    report.rates_t.insert(report.rates_t.end(), rt.begin(), rt.end());
    report.rates_2t.insert(report.rates_2t.end(), r2t.begin(), r2t.end());
  }
  if (report.rates_2t.size() < 50) {
    throw Error(Errc::InsufficientSurvivors,
                std::to_string(report.rates_2t.size()) + " surviving paths, at least 50 are needed");
  }

  const double target = report.target;
  const double med = median(report.rates_2t);
  report.checks.push_back(make_check("median_rate_at_2T_within_20pct", std::abs(med / target - 1.0) <= 0.2,
                                     "median " + fmt(med) + " vs c_pbar " + fmt(target)));

  std::size_t closer = 0;
  for (const DecayBatch& b : report.batches) {
    if (b.survivors > 0 && std::abs(b.median_2t - target) <= std::abs(b.median_t - target)) ++closer;
  }
  const auto need_closer = static_cast<std::size_t>(std::ceil(0.7 * static_cast<double>(cfg.batches) - 1e-9));
  report.checks.push_back(make_check("2T_closer_than_T_in_70pct_batches", closer >= need_closer,
                                     std::to_string(closer) + " of " + std::to_string(cfg.batches) + " batches"));

  std::size_t within = 0;
  for (double r : baseline) within += std::abs(r / target - 1.0) <= 0.1;
  const auto need_within = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(baseline.size()) - 1e-9));
  report.checks.push_back(make_check("unkilled_baseline_within_10pct_in_80pct_seeds",
                                     !baseline.empty() && within >= need_within,
                                     std::to_string(within) + " of " + std::to_string(baseline.size()) + " seeds"));

  const McEstimate killed = mean_estimate(report.rates_2t);
  const McEstimate unkilled = mean_estimate(baseline);
  const double gap = std::abs(killed.mean - unkilled.mean);
  report.checks.push_back(make_check("baseline_agrees_with_killed_within_2_pooled_SE",
                                     gap <= 2.0 * pooled_se(killed.se, unkilled.se),
                                     "killed " + fmt(killed.mean) + ", unkilled " + fmt(unkilled.mean), false));
  return report;
}

// ---------------------------------------------------------------------------
// Population growth on survival

GrowthReport estimate_population_growth(const ExperimentConfig& cfg) {
  require_supercritical(cfg, "growth experiment");
  require_trials(cfg);
  const double horizon = cfg.horizon;
  const double x = cfg.x_values.empty() ? 0.0 : cfg.x_values.front();
  std::vector<double> times = cfg.checkpoints;
  if (times.empty()) times = {horizon / 2.0, horizon};
  if (times.size() < 2) throw Error(Errc::InvalidArgument, "growth needs at least two checkpoints");

  RunOptions options;
  options.horizon = horizon;
  options.checkpoints = times;
  options.caps = cfg.caps;

  struct Outcome {
    bool survived = false;
    bool capped = false;
    bool bound_ok = true;
    bool zero_after_zeta = true;
    std::vector<double> blocks;
  };
  std::vector<Outcome> outcomes(cfg.trials);
  const double c = cfg.model.c();
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
    const Trajectory tr = run_killed(cfg.model, x, options, trial_seed(cfg.master_seed, kGrowth, i));
    Outcome& o = outcomes[i];
    o.capped = tr.capped;
    o.survived = !tr.extinct;
    for (const Checkpoint& cp : tr.checkpoints) {
      if (static_cast<double>(cp.blocks) > std::exp(x + c * cp.t) * (1.0 + 1e-12)) o.bound_ok = false;
      if (tr.extinct && cp.t >= *tr.zeta && cp.blocks != 0) o.zero_after_zeta = false;
      o.blocks.push_back(static_cast<double>(cp.blocks));
    }
    // Unobserved checkpoints of a capped run carry the cap as a lower bound.
    while (o.blocks.size() < times.size()) o.blocks.push_back(static_cast<double>(cfg.caps.max_blocks + 1));
  });

  GrowthReport report;
  bool bound_ok = true, zero_ok = true;
  std::size_t survivors = 0;
  for (const Outcome& o : outcomes) {
    bound_ok = bound_ok && o.bound_ok;
    zero_ok = zero_ok && o.zero_after_zeta;
    if (o.survived) {
      ++survivors;
      report.capped_survivors += o.capped;
    }
  }
  if (survivors < 20) {
    throw Error(Errc::InsufficientSurvivors, std::to_string(survivors) + " surviving paths, at least 20 are needed");
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> n;
    for (const Outcome& o : outcomes) {
      if (o.survived) n.push_back(o.blocks[k]);
    }
    GrowthRow row;
    row.t = times[k];
    row.survivors = n.size();
    row.median = median(n);
    row.q25 = quantile(n, 0.25);
    row.q75 = quantile(n, 0.75);
    row.max_blocks = static_cast<std::size_t>(*std::max_element(n.begin(), n.end()));
    row.bound = std::exp(x + c * times[k]);
    report.rows.push_back(row);
  }
  const GrowthRow& last = report.rows.back();
  const GrowthRow& prev = report.rows[report.rows.size() - 2];
  report.checks.push_back(make_check("median_N_increases", last.median > prev.median,
                                     "median N " + fmt(prev.median) + " at t = " + fmt(prev.t) + ", " +
                                         fmt(last.median) + " at t = " + fmt(last.t)));
  report.checks.push_back(make_check("N_le_exp_x_plus_ct", bound_ok, "all recorded checkpoints of all runs"));
  report.checks.push_back(make_check("extinct_paths_zero_after_zeta", zero_ok, "all extinct runs"));
  report.checks.push_back(make_check("capped_survivors", true,
                                     std::to_string(report.capped_survivors) + " survivors hit caps.max_blocks", false));
  return report;
}

// ---------------------------------------------------------------------------
// Many-to-one

ManyToOneReport many_to_one_check(const ExperimentConfig& cfg) {
  require_trials(cfg);
  std::vector<double> times = cfg.checkpoints;
  if (times.empty()) times = {cfg.horizon};
  std::vector<Functional> functionals = cfg.functionals;
  if (functionals.empty()) functionals = {Functional{}, Functional{Functional::Kind::IndicatorMassAbove, std::nullopt}};
  const double t_max = *std::max_element(times.begin(), times.end());
  const double target_speed = cfg.model.c_p_bar();

  auto threshold = [&](const Functional& f, double t) {
    return f.threshold.value_or(std::exp(-t * target_speed));
  };
  auto evaluate = [&](const Functional& f, double t, double log_mass) {
    if (f.kind == Functional::Kind::ConstantOne) return 1.0;
    return log_mass > std::log(threshold(f, t)) ? 1.0 : 0.0;
  };

  RunOptions options;
  options.horizon = t_max;
  options.checkpoints = times;
  options.caps = cfg.caps;
  options.keep_snapshots = true;

  const std::size_t nf = functionals.size(), nt = times.size(), trials = cfg.trials;
  std::vector<double> lhs(nf * nt * trials), rhs(nf * nt * trials);
  parallel_for(trials, cfg.threads, [&](std::size_t i) {
    const Trajectory tr = run_unkilled(cfg.model.measure(), 0.0, options, trial_seed(cfg.master_seed, kManyToOnePopulation, i));
    if (tr.capped) throw Error(Errc::CapExceeded, "many-to-one needs uncapped populations");
    Rng rng = Rng::substream(trial_seed(cfg.master_seed, kManyToOneSpine, i), 0);
    const SpinePath spine = simulate_spine(cfg.model, std::nullopt, std::numeric_limits<double>::infinity(), t_max, rng);
    for (std::size_t a = 0; a < nf; ++a) {
      for (std::size_t k = 0; k < nt; ++k) {
        const double t = times[k];
        double sum = 0.0;
        for (double l : tr.snapshots[k].log_masses) sum += std::exp(l) * evaluate(functionals[a], t, l);
        const bool dead = spine.killed_at && *spine.killed_at <= t;
        const std::size_t slot = (a * nt + k) * trials + i;
        lhs[slot] = sum;
        rhs[slot] = dead ? 0.0 : evaluate(functionals[a], t, spine.log_mass_at(t));
      }
    }
  });

  ManyToOneReport report;
  const double kappa = cfg.model.measure().kappa();
  for (std::size_t a = 0; a < nf; ++a) {
    for (std::size_t k = 0; k < nt; ++k) {
      const std::size_t base = (a * nt + k) * trials;
      ManyToOneRow row;
      row.functional = functionals[a].name();
      row.t = times[k];
      row.threshold = functionals[a].kind == Functional::Kind::ConstantOne ? 0.0 : threshold(functionals[a], times[k]);
      row.lhs = mean_estimate(std::span<const double>(lhs).subspan(base, trials));
      row.rhs = mean_estimate(std::span<const double>(rhs).subspan(base, trials));
      const double allowance = 3.0 * pooled_se(row.lhs.se, row.rhs.se) + 1e-9;
      const std::string tag = row.functional + "_t=" + fmt(row.t);
      report.checks.push_back(make_check("paired_within_3SE_" + tag, std::abs(row.lhs.mean - row.rhs.mean) <= allowance,
                                         "lhs " + fmt(row.lhs.mean) + " +- " + fmt(row.lhs.se) + ", rhs " +
                                             fmt(row.rhs.mean) + " +- " + fmt(row.rhs.se)));
      if (functionals[a].kind == Functional::Kind::ConstantOne) {
        const double expected = std::exp(-kappa * row.t);
        const bool ok = std::abs(row.lhs.mean - expected) <= 3.0 * row.lhs.se + 1e-9 &&
                        std::abs(row.rhs.mean - expected) <= 3.0 * row.rhs.se + 1e-9;
        report.checks.push_back(make_check("mass_decay_exp(-kappa t)_" + tag, ok, "target " + fmt(expected)));
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// First-passage identity on the tilted spine

SpineSurvivalReport verify_spine_survival(const ExperimentConfig& cfg) {
  require_trials(cfg);
  if (cfg.x_values.empty() || cfg.p_values.empty()) throw Error(Errc::InvalidArgument, "spine-survival needs x and p values");
  const double x_top = *std::max_element(cfg.x_values.begin(), cfg.x_values.end());

  SpineSurvivalReport report;
  for (std::size_t jp = 0; jp < cfg.p_values.size(); ++jp) {
    const double p = cfg.p_values[jp];
    const std::uint64_t seed = trial_seed(cfg.master_seed, kSpineSurvival, jp);
    const double slope = psi_tilted_slope(cfg.model, p);
    if (slope > 0.0) {
      const ScaleTable table = scale_function(cfg.model, p, cfg.scale_step, std::max(x_top + 1.0, cfg.scale_step));
      for (double x : cfg.x_values) {
        SpineSurvivalRow row;
        row.p = p;
        row.x = x;
        row.analytic = spine_survival_prob(cfg.model, p, x, &table);
        const SpineSurvivalEstimate est = spine_survival_mc(cfg.model, p, x, cfg.horizon, cfg.trials, seed);
        row.mc = est.survival;
        row.margin = est.lundberg_margin ? est.lundberg_margin->mean + 3.0 * est.lundberg_margin->se : 1.0;
        const double lo = row.analytic - 3.0 * row.mc.se;
        const double hi = row.analytic + 3.0 * row.mc.se + row.margin;
        report.checks.push_back(make_check("mc_within_[analytic-3SE,analytic+3SE+margin]_p=" + fmt(p) + "_x=" + fmt(x),
                                           row.mc.mean >= lo && row.mc.mean <= hi,
                                           "analytic " + fmt(row.analytic) + ", mc " + fmt(row.mc.mean) + " +- " +
                                               fmt(row.mc.se) + ", margin " + fmt(row.margin)));
        report.rows.push_back(row);
      }
    } else {
      for (double x : cfg.x_values) {
        SpineSurvivalRow row;
        row.p = p;
        row.x = x;
        row.analytic = 0.0;
        row.mc = spine_survival_mc(cfg.model, p, x, cfg.horizon, cfg.trials, seed).survival;
        row.mc_doubled = spine_survival_mc(cfg.model, p, x, 2.0 * cfg.horizon, cfg.trials, seed).survival;
        row.margin = row.mc.mean;
        report.checks.push_back(make_check(
            "degenerate_frequency_decays_p=" + fmt(p) + "_x=" + fmt(x),
            row.mc_doubled->mean <= row.mc.mean + 2.0 * pooled_se(row.mc.se, row.mc_doubled->se),
            "survival to T " + fmt(row.mc.mean) + ", to 2T " + fmt(row.mc_doubled->mean)));
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Martingale means

MartingaleReport martingale_mean_suite(const ExperimentConfig& cfg) {
  require_trials(cfg);
  const double x = cfg.x_values.empty() ? 0.0 : cfg.x_values.front();
  std::vector<double> times = cfg.checkpoints;
  if (times.empty()) times = {0.0, cfg.horizon};
  const double t_max = times.back();
  const std::size_t nt = times.size(), np = cfg.p_values.size(), trials = cfg.trials;
  const auto& nu = cfg.model.measure();
  const double c = cfg.model.c();

  for (double t : cfg.z_times) {
    if (std::find(times.begin(), times.end(), t) == times.end()) {
      throw Error(Errc::InvalidArgument, "z_times must be a subset of the checkpoints");
    }
  }

  RunOptions options;
  options.horizon = t_max;
  options.checkpoints = times;
  options.caps = cfg.caps;
  options.keep_snapshots = true;

  // Intrinsic additive martingale on the unkilled chain.
  std::vector<double> intrinsic(np * nt * trials);
  parallel_for(np > 0 ? trials : 0, cfg.threads, [&](std::size_t i) {
    const Trajectory tr = run_unkilled(nu, 0.0, options, trial_seed(cfg.master_seed, kMartingaleUnkilled, i));
    if (tr.capped) throw Error(Errc::CapExceeded, "unkilled martingale run hit caps.max_blocks");
    for (std::size_t a = 0; a < np; ++a) {
      for (std::size_t k = 0; k < nt; ++k) {
        intrinsic[(a * nt + k) * trials + i] = additive_intrinsic(tr.snapshots[k], nu, cfg.p_values[a]);
      }
    }
  });

  std::vector<std::optional<ScaleTable>> tables(np);
  for (std::size_t a = 0; a < np; ++a) {
    if (psi_tilted_slope(cfg.model, cfg.p_values[a]) > 0.0) {
      tables[a] = scale_function(cfg.model, cfg.p_values[a], cfg.scale_step, x + c * t_max + 1.0);
    }
  }

  MartingaleReport report;
  std::optional<FunctionTable> g;
  double interp_error = 0.0;
  McEstimate g_at_x;
  if (!cfg.z_times.empty()) {
    ExperimentConfig sub = cfg;
    sub.x_values = cfg.curve_grid.empty() ? std::vector<double>{x} : cfg.curve_grid;
    sub.horizon = cfg.curve_horizon;
    sub.trials = cfg.curve_trials;
    sub.caps.max_blocks = cfg.curve_cap;
    sub.caps.prune_window = std::numeric_limits<double>::infinity();
    sub.master_seed = trial_seed(cfg.master_seed, kMartingaleCurve, 0);
    ExtinctionReport ext = estimate_extinction(sub);
    report.curve = ext.curve;
    g = report.curve->as_table();
    interp_error = report.curve->interpolation_error();
    // SE at x from the nearest grid node.
    std::size_t best = 0;
    for (std::size_t j = 1; j < sub.x_values.size(); ++j) {
      if (std::abs(sub.x_values[j] - x) < std::abs(sub.x_values[best] - x)) best = j;
    }
    g_at_x = report.curve->g_hat[best];
  }

  // Killed additive martingale and the multiplicative process.
  std::vector<double> killed(np * nt * trials, 0.0);
  std::vector<double> product(nt * trials, 1.0);
  std::vector<unsigned char> usable(trials, 1);
  std::vector<unsigned char> z_one_ok(trials, 1);
  std::vector<std::size_t> sandwich_violations(trials, 0);
  parallel_for(trials, cfg.threads, [&](std::size_t i) {
    const Trajectory tr = run_killed(cfg.model, x, options, trial_seed(cfg.master_seed, kMartingaleKilled, i));
    if (tr.capped) {
      usable[i] = 0;
      return;
    }
    for (std::size_t k = 0; k < nt; ++k) {
      const Snapshot& snap = tr.snapshots[k];
      for (std::size_t a = 0; a < np; ++a) {
        if (!tables[a]) continue;
        const double p = cfg.p_values[a];
        const SandwichReport s = sandwich_check(snap, cfg.model, p, *tables[a], x);
        killed[(a * nt + k) * trials + i] = s.value;
        if (!s.holds) ++sandwich_violations[i];
      }
      if (g) {
        const double z = multiplicative(snap, *g, cfg.model, x);
        product[k * trials + i] = z;
        if (tr.extinct && snap.t >= *tr.zeta && z != 1.0) z_one_ok[i] = 0;
      }
    }
  });

  auto gather = [&](const std::vector<double>& values, std::size_t base) {
    std::vector<double> out;
    out.reserve(trials);
    for (std::size_t i = 0; i < trials; ++i) {
      if (usable[i]) out.push_back(values[base + i]);
    }
    return out;
  };

  auto add_row = [&](std::string quantity, double p, double t, McEstimate est, double target, double allowance) {
    MartingaleRow row{quantity, p, t, est, target, allowance, std::abs(est.mean - target) <= allowance};
    report.checks.push_back(make_check(quantity + "_p=" + fmt(p) + "_t=" + fmt(t), row.passed,
                                       "mean " + fmt(est.mean) + " +- " + fmt(est.se) + ", target " + fmt(target)));
    report.rows.push_back(std::move(row));
  };

  for (std::size_t a = 0; a < np; ++a) {
    const double p = cfg.p_values[a];
    for (std::size_t k = 0; k < nt; ++k) {
      const McEstimate m = mean_estimate(std::span<const double>(intrinsic).subspan((a * nt + k) * trials, trials));
      add_row("M", p, times[k], m, 1.0, 3.0 * m.se + 1e-12);
    }
    if (!tables[a]) {
      report.checks.push_back(make_check("Mx_p=" + fmt(p), true, "skipped: c <= phi'(p)", false));
      continue;
    }
    const double w = (*tables[a])(x);
    for (std::size_t k = 0; k < nt; ++k) {
      const McEstimate m = mean_estimate(gather(killed, (a * nt + k) * trials));
      add_row("Mx", p, times[k], m, w, 3.0 * m.se + 1e-12 * w);
    }
  }
  if (g) {
    const double target = (*g)(x);
    for (double t : cfg.z_times) {
      const auto k = static_cast<std::size_t>(std::find(times.begin(), times.end(), t) - times.begin());
      const McEstimate z = mean_estimate(gather(product, k * trials));
      add_row("Z", 0.0, t, z, target, 3.0 * pooled_se(z.se, g_at_x.se) + interp_error + 1e-12);
    }
    const bool ok = std::all_of(z_one_ok.begin(), z_one_ok.end(), [](auto v) { return v != 0; });
    report.checks.push_back(make_check("Z_equals_one_on_extinct_paths", ok, "checkpoints at or after zeta"));
  }
  std::size_t violations = 0, unusable = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    violations += sandwich_violations[i];
    unusable += usable[i] == 0;
  }
  report.checks.push_back(make_check("sandwich_lower_bound_holds", violations == 0,
                                     std::to_string(violations) + " violating snapshots"));
  report.checks.push_back(make_check("capped_killed_runs_excluded", true, std::to_string(unusable) + " runs", false));
  return report;
}

}  // namespace fragkill
