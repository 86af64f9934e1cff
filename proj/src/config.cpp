#include "fragkill/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fragkill/error.hpp"

namespace fragkill {

namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& what) { throw Error(Errc::ConfigError, what); }

// Experiment-specific defaults, applied before the file's own values.
struct Defaults {
  double c_factor = 2.0;
  std::vector<double> x{0.0};
  std::vector<double> interior_x;
  std::vector<double> p{1.0};
  double horizon = 100.0;
  std::size_t trials = 10000;
  std::vector<double> checkpoints;
  std::size_t max_blocks = 1'000'000;
  double prune_window = std::numeric_limits<double>::infinity();
  std::vector<double> z_times;
};

Defaults defaults_for(Command command, std::string_view name) {
  Defaults d;
  if (command == Command::Compute) return d;
  if (command == Command::Simulate) {
    d.horizon = 20.0;
    d.max_blocks = 1'000'000;
    return d;
  }
  if (name == "extinction") {
    d.x = {0.0, 0.5, 1.0, 2.0};
    d.interior_x = {0.0, 1.0};
    d.max_blocks = 200;
  } else if (name == "decay") {
    d.x = {1.0};
    d.trials = 20;
    d.prune_window = 4.0;
  } else if (name == "growth") {
    d.c_factor = 1.2;
    d.x = {2.0};
    d.trials = 400;
    d.checkpoints = {50.0, 100.0};
    d.max_blocks = 20000;
  } else if (name == "many-to-one") {
    d.horizon = 5.0;
    d.checkpoints = {2.0, 5.0};
  } else if (name == "spine-survival") {
    d.x = {0.0, 0.5, 1.0};
    d.horizon = 200.0;
  } else if (name == "martingales") {
    d.x = {1.0};
    d.p = {0.5, 1.0};
    d.horizon = 10.0;
    d.checkpoints = {0.0, 1.0, 5.0, 10.0};
    d.z_times = {1.0, 5.0};
  }
  return d;
}

// Tracks which keys of an object were consumed so leftovers can be reported.
class Reader {
 public:
  Reader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) fail(path_ + " must be an object");
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!used_.count(it.key())) fail("unknown key '" + where(it.key()) + "'");
    }
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> used_;
};

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where + " must be finite");
  return d;
}

std::size_t as_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::vector<double> as_numbers(const json& v, const std::string& where) {
  if (v.is_number()) return {as_number(v, where)};
  if (!v.is_array()) fail(where + " must be a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

double number_or(Reader& r, const std::string& key, double fallback) {
  const json* v = r.find(key);
  return v ? as_number(*v, r.where(key)) : fallback;
}

std::size_t count_or(Reader& r, const std::string& key, std::size_t fallback) {
  const json* v = r.find(key);
  return v ? as_count(*v, r.where(key)) : fallback;
}

std::vector<double> numbers_or(Reader& r, const std::string& key, std::vector<double> fallback) {
  const json* v = r.find(key);
  return v ? as_numbers(*v, r.where(key)) : fallback;
}

DislocationMeasure binary_measure() {
  const std::vector<double> halves{0.5, 0.5};
  return make_dislocation_measure({Atom{1.0, validate_mass_partition(halves)}});
}

DislocationMeasure read_measure(const json* node) {
  if (!node) return binary_measure();
  Reader r(*node, "measure");
  const json* atoms = r.find("atoms");
  r.finish();
  if (!atoms || !atoms->is_array()) fail("measure.atoms must be an array");
  std::vector<Atom> out;
  for (std::size_t i = 0; i < atoms->size(); ++i) {
    const std::string at = "measure.atoms[" + std::to_string(i) + "]";
    Reader a((*atoms)[i], at);
    const json* w = a.find("w");
    const json* s = a.find("s");
    a.finish();
    if (!w || !s) fail(at + " needs 'w' and 's'");
    const std::vector<double> parts = as_numbers(*s, at + ".s");
    out.push_back(Atom{as_number(*w, at + ".w"), validate_mass_partition(parts)});
  }
  return make_dislocation_measure(std::move(out));
}

ordered measure_echo(const DislocationMeasure& nu) {
  ordered atoms = ordered::array();
  for (const Atom& a : nu.atoms()) {
    ordered atom;
    atom["w"] = a.weight;
    atom["s"] = std::vector<double>(a.partition.parts().begin(), a.partition.parts().end());
    atoms.push_back(atom);
  }
  ordered m;
  m["atoms"] = atoms;
  return m;
}

ordered window_echo(double w) { return std::isfinite(w) ? ordered(w) : ordered(nullptr); }

Caps read_caps(const json* node, const Defaults& d) {
  Caps caps;
  caps.max_blocks = d.max_blocks;
  caps.prune_window = d.prune_window;
  if (!node) return caps;
  Reader r(*node, "caps");
  caps.max_blocks = count_or(r, "max_blocks", caps.max_blocks);
  if (const json* v = r.find("hard")) {
    if (!v->is_boolean()) fail("caps.hard must be a boolean");
    caps.hard = v->get<bool>();
  }
  // null disables pruning
  if (node->contains("prune_window")) {
    const json* v = r.find("prune_window");
    caps.prune_window = v ? as_number(*v, "caps.prune_window") : std::numeric_limits<double>::infinity();
  }
  r.finish();
  if (caps.max_blocks < 1) fail("caps.max_blocks must be >= 1");
  if (!(caps.prune_window > 0.0)) fail("caps.prune_window must be positive");
  return caps;
}

std::vector<Functional> read_functionals(const json* node) {
  std::vector<Functional> out;
  if (!node) return out;
  if (!node->is_array()) fail("functionals must be an array");
  for (std::size_t i = 0; i < node->size(); ++i) {
    const std::string at = "functionals[" + std::to_string(i) + "]";
    Reader r((*node)[i], at);
    const json* kind = r.find("kind");
    const json* threshold = r.find("threshold");
    r.finish();
    if (!kind || !kind->is_string()) fail(at + ".kind must be a string");
    Functional f;
    const std::string k = kind->get<std::string>();
    if (k == "one") {
      f.kind = Functional::Kind::ConstantOne;
      if (threshold) fail(at + ": 'one' takes no threshold");
    } else if (k == "mass_above") {
      f.kind = Functional::Kind::IndicatorMassAbove;
      if (threshold) {
        f.threshold = as_number(*threshold, at + ".threshold");
        if (!(*f.threshold > 0.0 && *f.threshold <= 1.0)) fail(at + ".threshold must lie in (0, 1]");
      }
    } else {
      fail(at + ".kind must be 'one' or 'mass_above'");
    }
    out.push_back(f);
  }
  return out;
}

ordered functionals_echo(const std::vector<Functional>& fs) {
  ordered out = ordered::array();
  for (const Functional& f : fs) {
    ordered e;
    e["kind"] = f.kind == Functional::Kind::ConstantOne ? "one" : "mass_above";
    if (f.threshold) e["threshold"] = *f.threshold;
    out.push_back(e);
  }
  return out;
}

void require_ascending(const std::vector<double>& v, const std::string& where) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) fail(where + " must be strictly ascending");
  }
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"extinction",     "decay",       "growth", "many-to-one",
                                              "spine-survival", "martingales"};
  return names;
}

Config parse_config(std::string_view text, Command command, std::string_view experiment, const Overrides& overrides) {
  if (command == Command::Experiment &&
      std::find(experiment_names().begin(), experiment_names().end(), experiment) == experiment_names().end()) {
    std::string valid;
    for (const auto& n : experiment_names()) valid += (valid.empty() ? "" : ", ") + n;
    fail("unknown experiment '" + std::string(experiment) + "'; valid names: " + valid);
  }

  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  Reader r(root, "");
  const Defaults d = defaults_for(command, experiment);

  const DislocationMeasure nu = read_measure(r.find("measure"));
  const json* c_node = r.find("c");
  const json* factor_node = r.find("c_factor");
  if (c_node && factor_node) fail("give either 'c' or 'c_factor', not both");
  const LevyModel unit(1.0, nu);
  double c = 0.0;
  if (c_node) {
    c = as_number(*c_node, "c");
  } else {
    const double factor = factor_node ? as_number(*factor_node, "c_factor") : d.c_factor;
    if (!(factor > 0.0)) fail("c_factor must be positive");
    c = factor * unit.c_p_bar();
  }
  if (!(c > 0.0)) fail("c must be positive");

  Config cfg{command, std::string(experiment), ExperimentConfig{unit.with_drift(c)}, {}, {}, {}};
  ExperimentConfig& run = cfg.run;

  run.x_values = numbers_or(r, "x", d.x);
  run.interior_x = numbers_or(r, "interior_x", d.interior_x);
  run.p_values = numbers_or(r, "p", d.p);
  run.horizon = number_or(r, "horizon", d.horizon);
  run.trials = count_or(r, "trials", d.trials);
  run.checkpoints = numbers_or(r, "checkpoints", d.checkpoints);
  run.caps = read_caps(r.find("caps"), d);
  if (const json* v = r.find("master_seed")) {
    if (!v->is_number_unsigned()) fail("master_seed must be a non-negative integer");
    run.master_seed = v->get<std::uint64_t>();
  }
  run.batches = count_or(r, "batches", run.batches);
  run.baseline_seeds = count_or(r, "baseline_seeds", run.baseline_seeds);
  run.functionals = read_functionals(r.find("functionals"));
  run.z_times = numbers_or(r, "z_times", d.z_times);
  run.scale_step = number_or(r, "scale_step", run.scale_step);
  if (const json* curve = r.find("curve")) {
    Reader cr(*curve, "curve");
    run.curve_grid = numbers_or(cr, "grid", {});
    run.curve_trials = count_or(cr, "trials", run.curve_trials);
    run.curve_horizon = number_or(cr, "horizon", run.curve_horizon);
    run.curve_cap = count_or(cr, "cap", run.curve_cap);
    cr.finish();
  }
  if (run.curve_grid.empty() && !run.z_times.empty()) {
    for (int i = 0; i <= 16; ++i) run.curve_grid.push_back(0.25 * i);
  }

  // compute
  ComputeSettings& comp = cfg.compute;
  comp.p_grid = numbers_or(r, "p_grid", {0.0, 0.5, 1.0, 2.0});
  if (command == Command::Compute) comp.scale_p = 1.0;
  if (root.contains("scale")) {
    const json* scale = r.find("scale");
    if (!scale) {
      comp.scale_p.reset();
    } else {
      Reader sr(*scale, "scale");
      comp.scale_p = number_or(sr, "p", 1.0);
      comp.scale_h = number_or(sr, "h", comp.scale_h);
      comp.scale_x_max = number_or(sr, "x_max", comp.scale_x_max);
      sr.finish();
    }
  }

  // simulate
  SimulateSettings& sim = cfg.simulate;
  if (const json* v = r.find("mode")) {
    const std::string m = v->is_string() ? v->get<std::string>() : "";
    if (m == "killed") sim.mode = SimulateMode::Killed;
    else if (m == "unkilled") sim.mode = SimulateMode::Unkilled;
    else if (m == "spine") sim.mode = SimulateMode::Spine;
    else fail("mode must be 'killed', 'unkilled' or 'spine'");
  }
  sim.x = run.x_values.empty() ? 0.0 : run.x_values.front();
  sim.floor_eps = number_or(r, "floor_eps", 0.0);
  if (const json* v = r.find("tilt")) sim.tilt = as_number(*v, "tilt");
  if (const json* cols = r.find("martingale_columns")) {
    if (!cols->is_array()) fail("martingale_columns must be an array");
    for (const json& col : *cols) {
      const std::string name = col.is_string() ? col.get<std::string>() : "";
      if (name == "m_intrinsic") sim.m_intrinsic = true;
      else if (name == "m_killed") sim.m_killed = true;
      else if (name == "z_mult") sim.z_mult = true;
      else fail("martingale_columns entries must be m_intrinsic, m_killed or z_mult");
    }
  }
  sim.martingale_p = number_or(r, "martingale_p", run.p_values.empty() ? 1.0 : run.p_values.front());
  if (const json* zf = r.find("z_function")) {
    Reader zr(*zf, "z_function");
    std::vector<double> zx = numbers_or(zr, "x", {});
    std::vector<double> zy = numbers_or(zr, "y", {});
    zr.finish();
    if (zx.empty() || zx.size() != zy.size()) fail("z_function needs x and y arrays of equal, nonzero length");
    try {
      sim.z_function.emplace(zx, zy, zy.front(), zy.back());
    } catch (const Error& e) {
      fail(std::string("z_function: ") + e.what());
    }
  }
  r.finish();

  if (overrides.seed) run.master_seed = *overrides.seed;
  if (overrides.trials) run.trials = *overrides.trials;
  if (overrides.horizon) run.horizon = *overrides.horizon;
  if (overrides.threads) run.threads = std::max(1u, *overrides.threads);

  // Command-level validation.
  if (!(run.horizon > 0.0)) fail("horizon must be positive");
  require_ascending(run.checkpoints, "checkpoints");
  for (double t : run.checkpoints) {
    if (t < 0.0 || t > run.horizon) fail("checkpoints must lie in [0, horizon]");
  }
  for (double x : run.x_values) {
    if (x < 0.0) fail("x values must be >= 0");
  }
  if (command == Command::Experiment && run.x_values.empty()) fail("x must not be empty");
  if (command == Command::Simulate) {
    if (sim.mode == SimulateMode::Spine && (sim.m_intrinsic || sim.m_killed || sim.z_mult)) {
      fail("martingale_columns are not available in spine mode");
    }
    if (sim.mode == SimulateMode::Unkilled && (sim.m_killed || sim.z_mult)) {
      fail("m_killed and z_mult need mode 'killed'");
    }
    if (sim.z_mult && !sim.z_function) fail("z_mult needs z_function");
    if (sim.tilt && sim.mode != SimulateMode::Spine) fail("tilt applies to spine mode only");
    if (!(sim.floor_eps >= 0.0 && sim.floor_eps < 1.0)) fail("floor_eps must lie in [0, 1)");
  }
  if (command == Command::Compute && comp.scale_p) {
    if (!(comp.scale_h > 0.0) || !(comp.scale_x_max >= comp.scale_h)) fail("scale needs h > 0 and x_max >= h");
  }

  // Resolved echo. Loading it back reproduces the run.
  ordered echo;
  echo["measure"] = measure_echo(nu);
  echo["c"] = c;
  echo["master_seed"] = run.master_seed;
  echo["horizon"] = run.horizon;
  echo["checkpoints"] = run.checkpoints;
  echo["caps"] = {{"max_blocks", run.caps.max_blocks},
                  {"prune_window", window_echo(run.caps.prune_window)},
                  {"hard", run.caps.hard}};
  if (command == Command::Compute) {
    echo["p_grid"] = comp.p_grid;
    if (comp.scale_p) {
      echo["scale"] = {{"p", *comp.scale_p}, {"h", comp.scale_h}, {"x_max", comp.scale_x_max}};
    } else {
      echo["scale"] = nullptr;
    }
  } else if (command == Command::Simulate) {
    static const char* modes[] = {"killed", "unkilled", "spine"};
    echo["mode"] = modes[static_cast<int>(sim.mode)];
    echo["x"] = sim.x;
    echo["floor_eps"] = sim.floor_eps;
    if (sim.tilt) echo["tilt"] = *sim.tilt;
    ordered cols = ordered::array();
    if (sim.m_intrinsic) cols.push_back("m_intrinsic");
    if (sim.m_killed) cols.push_back("m_killed");
    if (sim.z_mult) cols.push_back("z_mult");
    echo["martingale_columns"] = cols;
    echo["martingale_p"] = sim.martingale_p;
    if (sim.z_function) {
      const auto zx = sim.z_function->x();
      const auto zy = sim.z_function->y();
      echo["z_function"] = {{"x", std::vector<double>(zx.begin(), zx.end())},
                            {"y", std::vector<double>(zy.begin(), zy.end())}};
    }
  } else {
    echo["x"] = run.x_values;
    echo["interior_x"] = run.interior_x;
    echo["p"] = run.p_values;
    echo["trials"] = run.trials;
    echo["batches"] = run.batches;
    echo["baseline_seeds"] = run.baseline_seeds;
    echo["functionals"] = functionals_echo(run.functionals);
    echo["z_times"] = run.z_times;
    echo["scale_step"] = run.scale_step;
    echo["curve"] = {{"grid", run.curve_grid},
                     {"trials", run.curve_trials},
                     {"horizon", run.curve_horizon},
                     {"cap", run.curve_cap}};
  }
  cfg.echo = echo.dump(2);
  return cfg;
}

Config load_config(const std::string& path, Command command, std::string_view experiment, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), command, experiment, overrides);
}

}  // namespace fragkill
