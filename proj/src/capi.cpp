#include "adapterlab/adapterlab.h"

#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "adapterlab/adapter.hpp"
#include "adapterlab/harness.hpp"
#include "adapterlab/model.hpp"

struct adapterlab_session {
  std::string error;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool allow_source = false;
  bool progress = false;
  std::vector<std::string> overrides;
};

struct adapterlab_adapter {
  adapterlab::AdapterModule module;
  std::string role;
};

struct adapterlab_model {
  adapterlab::EncoderModel model;
};

namespace {

template <class F>
int guarded(adapterlab_session* s, F&& f) {
  if (!s) return ADAPTERLAB_ERR_INTERNAL;
  s->error.clear();
  adapterlab::set_progress_output(s->progress ? stderr : nullptr);
  try {
    f();
    return ADAPTERLAB_OK;
  } catch (const adapterlab::Error& e) {
    s->error = e.what();
    return adapterlab::exit_code_for(e.kind());
  } catch (const std::bad_alloc&) {
    s->error = "out of memory";
  } catch (const std::exception& e) {
    s->error = e.what();
  }
  return ADAPTERLAB_ERR_INTERNAL;
}

void require(const char* p, const char* what) {
  if (!p || !*p) throw adapterlab::ConfigError(std::string(what) + " is required");
}

adapterlab::ExperimentConfig load_config(const adapterlab_session* s, const char* path) {
  require(path, "config path");
  return adapterlab::ExperimentConfig::load(path, s->overrides, s->seed);
}

}  // namespace

extern "C" {

const char* adapterlab_version(void) { return "0.1.0"; }

const char* adapterlab_status_name(int status) {
  switch (status) {
    case ADAPTERLAB_OK: return "ok";
    case ADAPTERLAB_ERR_CONFIG: return "config error";
    case ADAPTERLAB_ERR_DATA: return "data error";
    case ADAPTERLAB_ERR_CHECKPOINT: return "checkpoint error";
    default: return "internal error";
  }
}

adapterlab_session* adapterlab_session_new(void) { return new (std::nothrow) adapterlab_session(); }
void adapterlab_session_free(adapterlab_session* session) { delete session; }
const char* adapterlab_last_error(const adapterlab_session* s) { return s ? s->error.c_str() : "null session"; }
const char* adapterlab_last_output(const adapterlab_session* s) { return s ? s->output.c_str() : ""; }

int adapterlab_set_seed(adapterlab_session* s, uint64_t seed) {
  return guarded(s, [&] { s->seed = seed; });
}

int adapterlab_clear_seed(adapterlab_session* s) {
  return guarded(s, [&] { s->seed.reset(); });
}

int adapterlab_set_jobs(adapterlab_session* s, size_t jobs) {
  return guarded(s, [&] {
    if (jobs == 0) throw adapterlab::ConfigError("jobs must be at least 1");
    s->jobs = jobs;
  });
}

int adapterlab_set_allow_source(adapterlab_session* s, int allow) {
  return guarded(s, [&] { s->allow_source = allow != 0; });
}

int adapterlab_add_override(adapterlab_session* s, const char* assignment) {
  return guarded(s, [&] {
    require(assignment, "override");
    s->overrides.emplace_back(assignment);
  });
}

int adapterlab_clear_overrides(adapterlab_session* s) {
  return guarded(s, [&] { s->overrides.clear(); });
}

int adapterlab_set_progress(adapterlab_session* s, int enabled) {
  return guarded(s, [&] { s->progress = enabled != 0; });
}

int adapterlab_synth(adapterlab_session* s, const char* spec_path, const char* out_dir) {
  return guarded(s, [&] {
    require(out_dir, "output directory");
    adapterlab::cmd_synth(spec_path ? spec_path : "", out_dir, s->seed);
  });
}

int adapterlab_check_config(adapterlab_session* s, const char* config_path) {
  return guarded(s, [&] { s->output = load_config(s, config_path).to_json_text(); });
}

int adapterlab_train_la(adapterlab_session* s, const char* config_path) {
  return guarded(s, [&] { adapterlab::cmd_train_la(load_config(s, config_path), s->jobs); });
}

int adapterlab_train_ta(adapterlab_session* s, const char* config_path) {
  return guarded(s, [&] { adapterlab::cmd_train_ta(load_config(s, config_path), s->jobs); });
}

int adapterlab_eval(adapterlab_session* s, const char* config_path, adapterlab_track track) {
  return guarded(s, [&] {
    if (track != ADAPTERLAB_TRACK_A && track != ADAPTERLAB_TRACK_C) throw adapterlab::ConfigError("unknown track");
    adapterlab::EvalOptions o;
    o.track = track == ADAPTERLAB_TRACK_A ? adapterlab::Track::kA : adapterlab::Track::kC;
    o.allow_source = s->allow_source;
    s->output = adapterlab::cmd_eval(load_config(s, config_path), o).string();
  });
}

int adapterlab_report(adapterlab_session* s, const char* report_dir) {
  return guarded(s, [&] {
    require(report_dir, "report directory");
    s->output = adapterlab::cmd_report(report_dir).to_text();
  });
}

int adapterlab_adapter_load(adapterlab_session* s, const char* dir, adapterlab_adapter** out) {
  return guarded(s, [&] {
    require(dir, "adapter directory");
    if (!out) throw adapterlab::ConfigError("output handle is required");
    auto module = adapterlab::load_adapter(dir);
    std::string role(adapterlab::role_name(module.role()));
    *out = new adapterlab_adapter{std::move(module), std::move(role)};
  });
}

int adapterlab_adapter_save(adapterlab_session* s, const adapterlab_adapter* a, const char* dir) {
  return guarded(s, [&] {
    require(dir, "adapter directory");
    if (!a) throw adapterlab::ConfigError("adapter handle is required");
    adapterlab::save_adapter(a->module, dir);
  });
}

void adapterlab_adapter_free(adapterlab_adapter* a) { delete a; }
const char* adapterlab_adapter_tag(const adapterlab_adapter* a) { return a ? a->module.tag().c_str() : ""; }
const char* adapterlab_adapter_role(const adapterlab_adapter* a) { return a ? a->role.c_str() : ""; }
size_t adapterlab_adapter_bottleneck(const adapterlab_adapter* a) { return a ? a->module.bottleneck() : 0; }
size_t adapterlab_adapter_param_count(const adapterlab_adapter* a) { return a ? a->module.param_count() : 0; }

int adapterlab_model_load(adapterlab_session* s, const char* dir, adapterlab_model** out) {
  return guarded(s, [&] {
    require(dir, "model directory");
    if (!out) throw adapterlab::ConfigError("output handle is required");
    *out = new adapterlab_model{adapterlab::EncoderModel::load(dir)};
  });
}

void adapterlab_model_free(adapterlab_model* m) { delete m; }

size_t adapterlab_model_base_params(const adapterlab_model* m) {
  return m ? adapterlab::param_report(m->model, adapterlab::AdapterStack()).base_params : 0;
}

size_t adapterlab_model_d_model(const adapterlab_model* m) { return m ? m->model.config().d_model : 0; }

int adapterlab_model_check_adapter(adapterlab_session* s, const adapterlab_model* m, const adapterlab_adapter* a) {
  return guarded(s, [&] {
    if (!m || !a) throw adapterlab::ConfigError("model and adapter handles are required");
    a->module.check_compatible(m->model.config());
  });
}

}  // extern "C"
