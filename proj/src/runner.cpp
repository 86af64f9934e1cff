#include "fragkill/runner.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fragkill/levy.hpp"
#include "fragkill/martingales.hpp"
#include "fragkill/montecarlo.hpp"
#include "fragkill/population.hpp"
#include "fragkill/spine.hpp"

namespace fragkill {

namespace {

using ordered = nlohmann::ordered_json;

// Minimal RFC 4180 writer; none of our fields need quoting except free text.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    for (auto h : header) cell(h);
    end_row();
  }

  Csv& cell(std::string_view text) {
    if (!first_) out_ += ',';
    first_ = false;
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) {
      out_ += text;
    } else {
      out_ += '"';
      for (char ch : text) {
        if (ch == '"') out_ += '"';
        out_ += ch;
      }
      out_ += '"';
    }
    return *this;
  }
  Csv& num(double v) { return cell(format_number(v)); }
  Csv& count(std::size_t v) { return cell(std::to_string(v)); }
  Csv& empty() { return cell(""); }

  void end_row() {
    out_ += "\r\n";
    first_ = true;
  }

  void add_header(std::string_view h) {
    // Only valid before any data row.
    out_.resize(out_.size() - 2);
    out_ += ',';
    out_ += h;
    out_ += "\r\n";
  }

  const std::string& str() const noexcept { return out_; }

 private:
  std::string out_;
  bool first_ = true;
};

ordered checks_json(const std::vector<Check>& checks) {
  ordered out = ordered::array();
  for (const Check& c : checks) {
    out.push_back({{"name", c.name}, {"passed", c.passed}, {"hard", c.hard}, {"detail", c.detail}});
  }
  return out;
}

ordered estimate_json(const McEstimate& e) { return {{"mean", e.mean}, {"se", e.se}, {"n", e.n}}; }

struct Products {
  std::string main;
  std::string summary;  // experiments only
  std::vector<Check> checks;
  ordered notes = ordered::object();
  int exit_code = kExitOk;
};

// ---------------------------------------------------------------------------

Products run_compute(const Config& cfg) {
  const LevyModel& model = cfg.run.model;
  const DislocationMeasure& nu = model.measure();
  ordered out;
  out["kappa"] = nu.kappa();
  out["rho"] = nu.rho();
  out["p_bar"] = model.p_bar();
  out["c_p_bar"] = model.c_p_bar();
  out["c"] = model.c();
  ordered table = ordered::array();
  for (double p : cfg.compute.p_grid) {
    if (!(p > kPLower)) throw Error(Errc::DomainError, "p_grid values must exceed -1");
    table.push_back({p, phi(nu, p)});
  }
  out["phi"] = table;
  ordered scale = ordered::array();
  if (cfg.compute.scale_p) {
    const ScaleTable w = scale_function(model, *cfg.compute.scale_p, cfg.compute.scale_h, cfg.compute.scale_x_max);
    const auto values = w.values();
    for (std::size_t i = 0; i < values.size(); ++i) scale.push_back({w.step() * static_cast<double>(i), values[i]});
    out["scale_p"] = w.p();
    out["scale_asymptote"] = w.asymptote();
  }
  out["scale"] = scale;
  ordered measure = ordered::array();
  for (const Atom& a : nu.atoms()) {
    measure.push_back({{"w", a.weight}, {"s", std::vector<double>(a.partition.parts().begin(), a.partition.parts().end())}});
  }
  out["measure"] = {{"atoms", measure}};
  Products products;
  products.main = out.dump(2) + "\n";
  return products;
}

// ---------------------------------------------------------------------------

std::vector<double> simulate_checkpoints(const Config& cfg) {
  if (!cfg.run.checkpoints.empty()) return cfg.run.checkpoints;
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(cfg.run.horizon * i / 100.0);
  grid.back() = cfg.run.horizon;
  return grid;
}

Products run_spine(const Config& cfg) {
  const SimulateSettings& sim = cfg.simulate;
  Rng rng = Rng::substream(cfg.run.master_seed, 0);
  const SpinePath path = simulate_spine(cfg.run.model, sim.tilt, sim.x, cfg.run.horizon, rng);
  Csv csv{"t", "position", "log_mass", "event"};
  csv.num(0.0).num(sim.x).num(0.0).cell("start");
  csv.end_row();
  double lost = 0.0;
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    const SpineEvent& e = path.events[i];
    lost += e.decrement;
    const bool last = i + 1 == path.events.size();
    const bool passage = last && path.tau_minus && !path.killed_at && *path.tau_minus == e.time;
    csv.num(e.time).num(sim.x + path.drift * e.time - lost).num(-lost).cell(passage ? "passage" : "jump");
    csv.end_row();
  }
  if (path.killed_at) {
    csv.num(*path.killed_at).num(path.final_position).num(-lost).cell("death");
    csv.end_row();
  } else if (!path.tau_minus) {
    csv.num(path.final_time).num(path.final_position).num(-lost).cell("horizon");
    csv.end_row();
  }
  Products products;
  products.main = csv.str();
  products.notes["tau_minus"] = path.tau_minus ? ordered(*path.tau_minus) : ordered(nullptr);
  products.notes["killed_at"] = path.killed_at ? ordered(*path.killed_at) : ordered(nullptr);
  products.notes["jumps"] = path.events.size();
  return products;
}

Products run_simulate(const Config& cfg) {
  const SimulateSettings& sim = cfg.simulate;
  if (sim.mode == SimulateMode::Spine) return run_spine(cfg);

  const LevyModel& model = cfg.run.model;
  RunOptions options;
  options.horizon = cfg.run.horizon;
  options.checkpoints = simulate_checkpoints(cfg);
  options.caps = cfg.run.caps;
  options.keep_snapshots = sim.m_intrinsic || sim.m_killed || sim.z_mult;

  std::optional<ScaleTable> table;
  if (sim.m_killed) {
    table = scale_function(model, sim.martingale_p, cfg.run.scale_step, sim.x + model.c() * cfg.run.horizon + 1.0);
  }

  const bool killed = sim.mode == SimulateMode::Killed;
  const Trajectory tr = killed ? run_killed(model, sim.x, options, cfg.run.master_seed)
                               : run_unkilled(model.measure(), sim.floor_eps, options, cfg.run.master_seed);

  Csv csv{"t", "N", "log_lambda1", "total_mass", "extinct", "zeta"};
  if (sim.m_intrinsic) csv.add_header("m_intrinsic");
  if (sim.m_killed) csv.add_header("m_killed");
  if (sim.z_mult) csv.add_header("z_mult");
  for (std::size_t k = 0; k < tr.checkpoints.size(); ++k) {
    const Checkpoint& cp = tr.checkpoints[k];
    const bool gone = tr.extinct && *tr.zeta <= cp.t;
    csv.num(cp.t).count(cp.blocks).num(cp.log_lambda1).num(cp.total_mass).count(gone ? 1 : 0);
    if (gone) {
      csv.num(*tr.zeta);
    } else {
      csv.empty();
    }
    if (sim.m_intrinsic) csv.num(additive_intrinsic(tr.snapshots[k], model.measure(), sim.martingale_p));
    if (sim.m_killed) csv.num(additive_killed(tr.snapshots[k], model, sim.martingale_p, *table, sim.x));
    if (sim.z_mult) csv.num(multiplicative(tr.snapshots[k], *sim.z_function, model, sim.x));
    csv.end_row();
  }

  Products products;
  products.main = csv.str();
  products.notes["extinct"] = tr.extinct;
  products.notes["zeta"] = tr.zeta ? ordered(*tr.zeta) : ordered(nullptr);
  products.notes["capped"] = tr.capped;
  products.notes["capped_at"] = tr.capped_at ? ordered(*tr.capped_at) : ordered(nullptr);
  products.notes["events"] = tr.events;
  products.notes["peak_blocks"] = tr.peak_blocks;
  if (tr.capped) {
    products.notes["warning"] = "run stopped at caps.max_blocks; later checkpoints are missing";
    if (cfg.run.caps.hard) products.exit_code = kExitCap;
  }
  return products;
}

// ---------------------------------------------------------------------------

const char* regime_name(SpeedRegime r) {
  switch (r) {
    case SpeedRegime::Subcritical: return "subcritical";
    case SpeedRegime::Critical: return "critical";
    case SpeedRegime::Supercritical: return "supercritical";
  }
  return "";
}

Products experiment_extinction(const ExperimentConfig& run) {
  const ExtinctionReport r = estimate_extinction(run);
  Csv csv{"x", "trials", "extinct_by_T", "se_T", "extinct_by_2T", "se_2T", "g_iso", "capped"};
  for (std::size_t j = 0; j < r.curve.x_grid.size(); ++j) {
    csv.num(r.curve.x_grid[j]).count(r.curve.g_hat[j].n).num(r.curve.g_hat[j].mean).num(r.curve.g_hat[j].se);
    csv.num(r.doubled[j].mean).num(r.doubled[j].se).num(r.curve.g_iso[j]).count(r.capped[j]);
    csv.end_row();
  }
  Products p;
  p.main = csv.str();
  p.checks = r.checks;
  p.notes["regime"] = regime_name(r.regime);
  p.notes["horizon"] = r.curve.horizon;
  p.notes["cap_bias_bound"] = r.cap_bias_bound;
  p.notes["interpolation_error"] = r.curve.interpolation_error();
  p.notes["lower_bound_note"] = "extinct-by-T frequencies are lower bounds of P(zeta < infinity)";
  return p;
}

Products experiment_decay(const ExperimentConfig& run) {
  const DecayReport r = estimate_decay_rate(run);
  Csv csv{"batch", "survivors", "median_rate_T", "median_rate_2T"};
  for (std::size_t b = 0; b < r.batches.size(); ++b) {
    csv.count(b).count(r.batches[b].survivors).num(r.batches[b].median_t).num(r.batches[b].median_2t);
    csv.end_row();
  }
  Products p;
  p.main = csv.str();
  p.checks = r.checks;
  p.notes["c_p_bar"] = r.target;
  p.notes["median_rate_T"] = median(r.rates_t);
  p.notes["median_rate_2T"] = median(r.rates_2t);
  p.notes["survivors"] = r.rates_2t.size();
  p.notes["capped"] = r.capped;
  p.notes["baseline_rate_2T"] = r.baseline_2t;
  return p;
}

Products experiment_growth(const ExperimentConfig& run) {
  const GrowthReport r = estimate_population_growth(run);
  Csv csv{"t", "survivors", "median_N", "q25_N", "q75_N", "max_N", "bound"};
  for (const GrowthRow& row : r.rows) {
    csv.num(row.t).count(row.survivors).num(row.median).num(row.q25).num(row.q75).count(row.max_blocks).num(row.bound);
    csv.end_row();
  }
  Products p;
  p.main = csv.str();
  p.checks = r.checks;
  p.notes["capped_survivors"] = r.capped_survivors;
  p.notes["capped_note"] = "capped survivors enter the medians as caps.max_blocks + 1, a lower bound";
  return p;
}

Products experiment_many_to_one(const ExperimentConfig& run) {
  const ManyToOneReport r = many_to_one_check(run);
  Csv csv{"functional", "t", "threshold", "lhs", "lhs_se", "rhs", "rhs_se"};
  for (const ManyToOneRow& row : r.rows) {
    csv.cell(row.functional).num(row.t);
    if (row.functional == "constant_one") {
      csv.empty();
    } else {
      csv.num(row.threshold);
    }
    csv.num(row.lhs.mean).num(row.lhs.se).num(row.rhs.mean).num(row.rhs.se);
    csv.end_row();
  }
  Products p;
  p.main = csv.str();
  p.checks = r.checks;
  p.notes["kappa"] = run.model.measure().kappa();
  return p;
}

Products experiment_spine_survival(const ExperimentConfig& run) {
  const SpineSurvivalReport r = verify_spine_survival(run);
  Csv csv{"p", "x", "analytic", "mc", "mc_se", "margin", "mc_2T", "mc_2T_se"};
  for (const SpineSurvivalRow& row : r.rows) {
    csv.num(row.p).num(row.x).num(row.analytic).num(row.mc.mean).num(row.mc.se).num(row.margin);
    if (row.mc_doubled) {
      csv.num(row.mc_doubled->mean).num(row.mc_doubled->se);
    } else {
      csv.empty().empty();
    }
    csv.end_row();
  }
  Products p;
  p.main = csv.str();
  p.checks = r.checks;
  return p;
}

Products experiment_martingales(const ExperimentConfig& run) {
  const MartingaleReport r = martingale_mean_suite(run);
  Csv csv{"quantity", "p", "t", "mean", "se", "target", "allowance", "passed"};
  for (const MartingaleRow& row : r.rows) {
    csv.cell(row.quantity);
    if (row.quantity == "Z") {
      csv.empty();
    } else {
      csv.num(row.p);
    }
    csv.num(row.t).num(row.estimate.mean).num(row.estimate.se).num(row.target).num(row.allowance).count(row.passed);
    csv.end_row();
  }
  Products p;
  p.main = csv.str();
  p.checks = r.checks;
  if (r.curve) {
    ordered curve;
    curve["x"] = r.curve->x_grid;
    curve["g_iso"] = r.curve->g_iso;
    ordered raw = ordered::array();
    for (const McEstimate& e : r.curve->g_hat) raw.push_back(estimate_json(e));
    curve["g_hat"] = raw;
    curve["interpolation_error"] = r.curve->interpolation_error();
    p.notes["extinction_curve"] = curve;
  }
  return p;
}

Products run_experiment(const Config& cfg) {
  static const std::map<std::string, std::function<Products(const ExperimentConfig&)>> table{
      {"extinction", experiment_extinction},   {"decay", experiment_decay},
      {"growth", experiment_growth},           {"many-to-one", experiment_many_to_one},
      {"spine-survival", experiment_spine_survival}, {"martingales", experiment_martingales},
  };
  Products p = table.at(cfg.experiment)(cfg.run);
  const bool passed = all_hard_passed(p.checks);
  ordered summary;
  summary["experiment"] = cfg.experiment;
  summary["passed"] = passed;
  summary["checks"] = checks_json(p.checks);
  summary["details"] = p.notes;
  p.summary = summary.dump(2) + "\n";
  if (!passed) p.exit_code = kExitStatistical;
  return p;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const char* command_name(Command c) {
  switch (c) {
    case Command::Compute: return "compute";
    case Command::Simulate: return "simulate";
    case Command::Experiment: return "experiment";
  }
  return "";
}

}  // namespace

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::DomainError:
    case Errc::BracketFailure:
    case Errc::DriftTooSmall:
    case Errc::NoConvergence:
    case Errc::GridRange:
      return kExitNumeric;
    case Errc::CapExceeded:
      return kExitCap;
    case Errc::InsufficientSurvivors:
      return kExitStatistical;
    default:
      return kExitConfig;
  }
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_atomically(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(Errc::IoError, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::IoError, "cannot rename onto '" + path + "'");
  }
}

RunOutcome execute(const RunRequest& request) noexcept {
  RunOutcome outcome;
  try {
    if (request.out_path.empty()) throw Error(Errc::ConfigError, "an output path is required");
    const auto started = std::chrono::steady_clock::now();
    const std::string started_at = utc_now();
    const Config cfg = load_config(request.config_path, request.command, request.experiment, request.overrides);

    Products products;
    int error_exit = kExitOk;
    try {
      switch (cfg.command) {
        case Command::Compute: products = run_compute(cfg); break;
        case Command::Simulate: products = run_simulate(cfg); break;
        case Command::Experiment: products = run_experiment(cfg); break;
      }
    } catch (const Error& e) {
      error_exit = exit_code_for(e.code());
      outcome.message = e.what();
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    std::vector<std::string> outputs;
    if (error_exit == kExitOk) {
      write_atomically(request.out_path, products.main);
      outputs.push_back(request.out_path);
      if (cfg.command == Command::Experiment) {
        write_atomically(request.out_path + ".summary.json", products.summary);
        outputs.push_back(request.out_path + ".summary.json");
      }
      outcome.exit_code = products.exit_code;
      if (products.exit_code == kExitStatistical) outcome.message = "one or more hard checks failed";
      if (products.exit_code == kExitCap) outcome.message = "run stopped at caps.max_blocks (caps.hard is set)";
    } else {
      outcome.exit_code = error_exit;
    }

    ordered manifest;
    manifest["command"] = command_name(cfg.command);
    if (!cfg.experiment.empty()) manifest["experiment"] = cfg.experiment;
    manifest["version"] = FRAGKILL_VERSION;
    manifest["master_seed"] = cfg.run.master_seed;
    manifest["threads"] = cfg.run.threads;
    manifest["started_at"] = started_at;
    manifest["wall_clock_seconds"] = elapsed;
    manifest["exit_code"] = outcome.exit_code;
    if (!outcome.message.empty()) manifest["message"] = outcome.message;
    manifest["config"] = ordered::parse(cfg.echo);
    ordered checks = ordered::array();
    for (const Check& c : products.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"hard", c.hard}});
    manifest["checks"] = checks;
    manifest["notes"] = products.notes;
    manifest["outputs"] = outputs;
    write_atomically(request.out_path + ".manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    outcome.exit_code = exit_code_for(e.code());
    outcome.message = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = kExitConfig;
    outcome.message = e.what();
  }
  return outcome;
}

}  // namespace fragkill
