#include "fragkill/fragkill.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "fragkill/levy.hpp"
#include "fragkill/measure.hpp"
#include "fragkill/runner.hpp"

struct fk_measure {
  fragkill::DislocationMeasure nu;
};

struct fk_model {
  fragkill::LevyModel model;
};

struct fk_scale {
  fragkill::ScaleTable table;
};

namespace {

thread_local std::string last_error;

fk_status fail(fk_status status, const char* message) {
  last_error = message;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
fk_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    last_error.clear();
    return FK_OK;
  } catch (const fragkill::Error& e) {
    return fail(static_cast<fk_status>(fragkill::exit_code_for(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FK_ERR_CONFIG, "out of memory");
  } catch (const std::exception& e) {
    return fail(FK_ERR_CONFIG, e.what());
  }
}

fragkill::Overrides convert(const fk_overrides* o) {
  fragkill::Overrides out;
  if (!o) return out;
  if (o->has_seed) out.seed = o->seed;
  if (o->has_trials) out.trials = o->trials;
  if (o->has_horizon) out.horizon = o->horizon;
  if (o->threads > 0) out.threads = o->threads;
  return out;
}

int run(fragkill::Command command, const char* name, const char* config_path, const char* out_path,
        const fk_overrides* overrides) {
  if (!config_path || !out_path) return fail(FK_ERR_NULL, "config and output paths are required");
  fragkill::RunRequest request;
  request.command = command;
  request.experiment = name ? name : "";
  request.config_path = config_path;
  request.out_path = out_path;
  try {
    request.overrides = convert(overrides);
  } catch (...) {
    return fail(FK_ERR_CONFIG, "out of memory");
  }
  const fragkill::RunOutcome outcome = fragkill::execute(request);
  last_error = outcome.message;
  return outcome.exit_code;
}

}  // namespace

extern "C" {

const char* fk_last_error(void) { return last_error.c_str(); }

const char* fk_version(void) { return FRAGKILL_VERSION; }

fk_status fk_measure_create(const double* weights, const double* parts, const size_t* offsets, size_t n_atoms,
                            fk_measure** out) {
  if (!out || (n_atoms > 0 && (!weights || !parts || !offsets))) return fail(FK_ERR_NULL, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::vector<fragkill::Atom> atoms;
    for (size_t i = 0; i < n_atoms; ++i) {
      if (offsets[i + 1] < offsets[i]) throw fragkill::Error(fragkill::Errc::InvalidArgument, "offsets must not decrease");
      const std::vector<double> raw(parts + offsets[i], parts + offsets[i + 1]);
      atoms.push_back(fragkill::Atom{weights[i], fragkill::validate_mass_partition(raw)});
    }
    *out = new fk_measure{fragkill::make_dislocation_measure(std::move(atoms))};
  });
}

void fk_measure_free(fk_measure* measure) { delete measure; }

fk_status fk_measure_kappa(const fk_measure* measure, double* out) {
  if (!measure || !out) return fail(FK_ERR_NULL, "null argument");
  *out = measure->nu.kappa();
  return FK_OK;
}

fk_status fk_measure_rho(const fk_measure* measure, double* out) {
  if (!measure || !out) return fail(FK_ERR_NULL, "null argument");
  *out = measure->nu.rho();
  return FK_OK;
}

fk_status fk_phi(const fk_measure* measure, double p, double* out) {
  if (!measure || !out) return fail(FK_ERR_NULL, "null argument");
  return guarded([&] { *out = fragkill::phi(measure->nu, p); });
}

fk_status fk_phi_prime(const fk_measure* measure, double p, double* out) {
  if (!measure || !out) return fail(FK_ERR_NULL, "null argument");
  return guarded([&] { *out = fragkill::phi_prime(measure->nu, p); });
}

fk_status fk_model_create(const fk_measure* measure, double c, fk_model** out) {
  if (!measure || !out) return fail(FK_ERR_NULL, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new fk_model{fragkill::LevyModel(c, measure->nu)}; });
}

void fk_model_free(fk_model* model) { delete model; }

fk_status fk_model_p_bar(const fk_model* model, double* out) {
  if (!model || !out) return fail(FK_ERR_NULL, "null argument");
  *out = model->model.p_bar();
  return FK_OK;
}

fk_status fk_model_c_p_bar(const fk_model* model, double* out) {
  if (!model || !out) return fail(FK_ERR_NULL, "null argument");
  *out = model->model.c_p_bar();
  return FK_OK;
}

fk_status fk_psi_tilted(const fk_model* model, double p, double lambda, double* out) {
  if (!model || !out) return fail(FK_ERR_NULL, "null argument");
  return guarded([&] { *out = fragkill::psi_tilted(model->model, p, lambda); });
}

fk_status fk_scale_create(const fk_model* model, double p, double h, double x_max, fk_scale** out) {
  if (!model || !out) return fail(FK_ERR_NULL, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new fk_scale{fragkill::scale_function(model->model, p, h, x_max)}; });
}

void fk_scale_free(fk_scale* scale) { delete scale; }

fk_status fk_scale_eval(const fk_scale* scale, double x, double* out, int* beyond) {
  if (!scale || !out) return fail(FK_ERR_NULL, "null argument");
  const fragkill::ScaleTable::Lookup v = scale->table.lookup(x);
  *out = v.value;
  if (beyond) *beyond = v.beyond ? 1 : 0;
  return FK_OK;
}

fk_status fk_spine_survival(const fk_model* model, const fk_scale* scale, double p, double x, double* out) {
  if (!model || !out) return fail(FK_ERR_NULL, "null argument");
  return guarded([&] {
    *out = fragkill::spine_survival_prob(model->model, p, x, scale ? &scale->table : nullptr);
  });
}

int fk_run_compute(const char* config_path, const char* out_path) {
  return run(fragkill::Command::Compute, nullptr, config_path, out_path, nullptr);
}

int fk_run_simulate(const char* config_path, const char* out_path, const fk_overrides* overrides) {
  return run(fragkill::Command::Simulate, nullptr, config_path, out_path, overrides);
}

int fk_run_experiment(const char* name, const char* config_path, const char* out_path, const fk_overrides* overrides) {
  if (!name) return fail(FK_ERR_NULL, "experiment name is required");
  return run(fragkill::Command::Experiment, name, config_path, out_path, overrides);
}

char* fk_experiment_names(void) {
  std::string joined;
  for (const std::string& n : fragkill::experiment_names()) joined += (joined.empty() ? "" : ",") + n;
  char* out = static_cast<char*>(std::malloc(joined.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, joined.c_str(), joined.size() + 1);
  return out;
}

void fk_string_free(char* s) { std::free(s); }

}  // extern "C"
