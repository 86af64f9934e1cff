// Command-line front end. Everything goes through the C API.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fragkill/fragkill.h"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> horizon;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, Common& opts, bool runs) {
  cmd->add_option("--config", opts.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "output file; the manifest goes to <out>.manifest.json")->required();
  if (!runs) return;
  cmd->add_option("--seed", opts.seed, "master seed (overrides the config)");
  cmd->add_option("--trials", opts.trials, "number of trials (overrides the config)");
  cmd->add_option("--horizon", opts.horizon, "time horizon (overrides the config)");
  cmd->add_option("--threads", opts.threads, "worker threads; results do not depend on it")
      ->envname("FRAGKILL_THREADS")
      ->check(CLI::PositiveNumber);
}

fk_overrides overrides_of(const Common& opts) {
  fk_overrides o{};
  if (opts.seed) {
    o.has_seed = 1;
    o.seed = *opts.seed;
  }
  if (opts.trials) {
    o.has_trials = 1;
    o.trials = *opts.trials;
  }
  if (opts.horizon) {
    o.has_horizon = 1;
    o.horizon = *opts.horizon;
  }
  o.threads = opts.threads;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fragmentation processes killed at an exponential barrier"};
  app.set_version_flag("--version", std::string(fk_version()));
  app.require_subcommand(1);

  Common compute_opts, simulate_opts, experiment_opts;
  std::string experiment_name;

  auto* compute = app.add_subcommand("compute", "spectral quantities and the scale function as JSON");
  add_common(compute, compute_opts, false);

  auto* simulate = app.add_subcommand("simulate", "one killed, unkilled or spine path as CSV");
  add_common(simulate, simulate_opts, true);

  char* names = fk_experiment_names();
  const std::string valid = names ? names : "";
  fk_string_free(names);
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiment: CSV plus summary JSON");
  experiment->add_option("name", experiment_name, "one of: " + valid)->required();
  add_common(experiment, experiment_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return FK_ERR_CONFIG;
  }

  int code = 0;
  if (*compute) {
    code = fk_run_compute(compute_opts.config.c_str(), compute_opts.out.c_str());
  } else if (*simulate) {
    const fk_overrides o = overrides_of(simulate_opts);
    code = fk_run_simulate(simulate_opts.config.c_str(), simulate_opts.out.c_str(), &o);
  } else {
    const fk_overrides o = overrides_of(experiment_opts);
    code = fk_run_experiment(experiment_name.c_str(), experiment_opts.config.c_str(), experiment_opts.out.c_str(), &o);
  }
  if (code != 0) std::fprintf(stderr, "fragkill: %s (exit %d)\n", fk_last_error(), code);
  return code;
}
