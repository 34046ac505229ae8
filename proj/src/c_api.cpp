#include "hopnav/hopnav.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "hopnav/error.hpp"
#include "hopnav/harness.hpp"

using namespace hopnav;
using nlohmann::json;

struct hopnav_model {
  HopModel model;
};
struct hopnav_runner {
  std::unique_ptr<Runner> runner;
};
struct hopnav_env {
  EnvironmentConfig env;
};
struct hopnav_config {
  RunConfig run;
};
struct hopnav_logs {
  std::vector<RunLog> logs;
};
struct hopnav_sweep {
  SweepResult result;
};

namespace {

thread_local std::string last_error;

int fail(int status, const std::string& message) {
  last_error = message;
  return status;
}

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return HOPNAV_INVALID_ARGUMENT;
    case ErrorCode::NoTouchdown: return HOPNAV_NO_TOUCHDOWN;
    case ErrorCode::LegCollapse: return HOPNAV_LEG_COLLAPSE;
    case ErrorCode::GroundPenetration: return HOPNAV_GROUND_PENETRATION;
    case ErrorCode::InterstitialMissed: return HOPNAV_INTERSTITIAL_MISSED;
    case ErrorCode::ExhaustedSampling: return HOPNAV_EXHAUSTED_SAMPLING;
    case ErrorCode::Diverged: return HOPNAV_DIVERGED;
    case ErrorCode::SingularKernel: return HOPNAV_SINGULAR_KERNEL;
    case ErrorCode::NonTiling: return HOPNAV_NON_TILING;
    case ErrorCode::ParseError: return HOPNAV_PARSE_ERROR;
    case ErrorCode::NondeterministicTransition: return HOPNAV_NONDETERMINISTIC_TRANSITION;
    case ErrorCode::UnknownStateReference: return HOPNAV_UNKNOWN_STATE_REFERENCE;
    case ErrorCode::AlphabetMismatch: return HOPNAV_ALPHABET_MISMATCH;
    case ErrorCode::NonConvergence: return HOPNAV_NON_CONVERGENCE;
    case ErrorCode::InitialStateViolating: return HOPNAV_INITIAL_STATE_VIOLATING;
    case ErrorCode::NoEligibleAction: return HOPNAV_NO_ELIGIBLE_ACTION;
    case ErrorCode::SatisfactionUnreachable: return HOPNAV_SATISFACTION_UNREACHABLE;
    case ErrorCode::ConfigError: return HOPNAV_CONFIG_ERROR;
    case ErrorCode::IoError: return HOPNAV_IO_ERROR;
  }
  return HOPNAV_INTERNAL_ERROR;
}

template <class F>
int guard(F&& f) {
  try {
    f();
    last_error.clear();
    return HOPNAV_OK;
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(HOPNAV_CONFIG_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HOPNAV_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(HOPNAV_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(HOPNAV_INTERNAL_ERROR, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

double p90(std::vector<double> errors) {
  if (errors.empty()) return 0.0;
  const std::size_t k = static_cast<std::size_t>(0.9 * static_cast<double>(errors.size() - 1) + 0.5);
  std::nth_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(k), errors.end());
  return errors[k];
}

json gait_json(const SteadyGait& g, double speed) {
  return {{"speed", speed},
          {"velocity", {g.velocity.x(), g.velocity.y(), g.velocity.z()}},
          {"pitch", g.pitch},
          {"hop_length", g.hop_length}};
}

std::optional<SteadyGait> cached_gait(const std::string& path, double speed) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  const json j = json::parse(read_text(path));
  if (j.at("speed").get<double>() != speed) return std::nullopt;
  SteadyGait g;
  const auto v = j.at("velocity").get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::IoError, "gait cache has a malformed velocity");
  g.velocity = Vec3(v[0], v[1], v[2]);
  g.pitch = j.at("pitch").get<double>();
  g.hop_length = j.at("hop_length").get<double>();
  return g;
}

void set_key(RunConfig& run, const char* key, json value) {
  json j = run;
  if (!j.contains(key)) throw Error(ErrorCode::ConfigError, std::string("unknown config key '") + key + "'");
  j[key] = std::move(value);
  RunConfig next = j.get<RunConfig>();
  next.validate();
  run = std::move(next);
}

}  // namespace

extern "C" {

const char* hopnav_last_error(void) { return last_error.c_str(); }

const char* hopnav_status_name(int status) {
  switch (status) {
    case HOPNAV_OK: return "ok";
    case HOPNAV_INTERNAL_ERROR: return "internal error";
    default: break;
  }
  if (status < HOPNAV_INVALID_ARGUMENT || status > HOPNAV_IO_ERROR) return "unknown status";
  return error_code_name(static_cast<ErrorCode>(status - 1));
}

void hopnav_string_free(char* s) { delete[] s; }

void hopnav_train_options_default(hopnav_train_options* options) {
  if (!options) return;
  options->samples = 20000;
  options->seed = 7;
  options->epochs = TrainConfig{}.epochs;
  options->probes = 500;
}

int hopnav_model_train(const hopnav_train_options* options, hopnav_model** out) {
  return guard([&] {
    require(out != nullptr, "null output handle");
    hopnav_train_options o;
    hopnav_train_options_default(&o);
    if (options) o = *options;
    require(o.samples > 0 && o.epochs > 0, "samples and epochs must be positive");
    SlipParams params;
    const auto data = generate_training_data(params, o.samples, o.seed);
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.seed = o.seed;
    auto m = std::make_unique<hopnav_model>();
    m->model = train(cfg, data);
    if (o.probes > 0) m->model.info.control_error = p90(round_trip_errors(m->model, params, o.probes, o.seed + 1));
    *out = m.release();
  });
}

int hopnav_model_load(const char* path, hopnav_model** out) {
  return guard([&] {
    require(path && out, "null argument");
    auto m = std::make_unique<hopnav_model>();
    m->model = HopModel::load(path);
    *out = m.release();
  });
}

int hopnav_model_save(const hopnav_model* model, const char* path) {
  return guard([&] {
    require(model && path, "null argument");
    model->model.save(path);
  });
}

int hopnav_model_info_get(const hopnav_model* model, hopnav_model_info* out) {
  return guard([&] {
    require(model && out, "null argument");
    const TrainingInfo& i = model->model.info;
    *out = {i.sample_count, i.final_loss, i.validation_rmse, i.control_error};
  });
}

int hopnav_model_measure(hopnav_model* model, size_t count, uint64_t seed, double tol, double* p90_out,
                         double* pass_fraction) {
  return guard([&] {
    require(model != nullptr, "null model");
    require(count > 0, "count must be positive");
    const auto errors = round_trip_errors(model->model, SlipParams{}, count, seed);
    const double p = p90(errors);
    model->model.info.control_error = p;
    if (p90_out) *p90_out = p;
    if (pass_fraction) {
      const auto n = std::count_if(errors.begin(), errors.end(), [&](double e) { return e <= tol; });
      *pass_fraction = static_cast<double>(n) / static_cast<double>(errors.size());
    }
  });
}

void hopnav_model_destroy(hopnav_model* model) { delete model; }

int hopnav_runner_create(const hopnav_model* model, double speed, const char* gait_cache, hopnav_runner** out) {
  return guard([&] {
    require(model && out, "null argument");
    require(speed > 0.0, "speed must be positive");
    std::optional<SteadyGait> gait;
    if (gait_cache) gait = cached_gait(gait_cache, speed);
    if (!gait) {
      gait = find_steady_gait(SlipParams{}, speed, 1.0);
      if (gait_cache) write_text(gait_cache, gait_json(*gait, speed).dump(2) + "\n");
    }
    auto r = std::make_unique<hopnav_runner>();
    r->runner = std::make_unique<Runner>(model->model, SlipParams{}, *gait);
    *out = r.release();
  });
}

void hopnav_runner_destroy(hopnav_runner* runner) { delete runner; }

int hopnav_env_builtin(const char* name, hopnav_env** out) {
  return guard([&] {
    require(name && out, "null argument");
    const std::string n = name;
    auto e = std::make_unique<hopnav_env>();
    if (n == "case-a") e->env = case_study_environment('A');
    else if (n == "case-b") e->env = case_study_environment('B');
    else if (n == "micro") e->env = micro_environment();
    else throw Error(ErrorCode::ConfigError, "unknown builtin environment '" + n + "'");
    *out = e.release();
  });
}

int hopnav_env_load(const char* path, hopnav_env** out) {
  return guard([&] {
    require(path && out, "null argument");
    auto e = std::make_unique<hopnav_env>();
    e->env = load_environment(path);
    *out = e.release();
  });
}

int hopnav_env_from_json(const char* text, hopnav_env** out) {
  return guard([&] {
    require(text && out, "null argument");
    auto e = std::make_unique<hopnav_env>();
    e->env = json::parse(text).get<EnvironmentConfig>();
    e->env.validate();
    *out = e.release();
  });
}

int hopnav_env_to_json(const hopnav_env* env, char** out) {
  return guard([&] {
    require(env && out, "null argument");
    *out = dup_string(json(env->env).dump(2));
  });
}

void hopnav_env_destroy(hopnav_env* env) { delete env; }

int hopnav_config_create(hopnav_config** out) {
  return guard([&] {
    require(out != nullptr, "null output handle");
    *out = new hopnav_config();
  });
}

int hopnav_config_load(const char* path, hopnav_config** out) {
  return guard([&] {
    require(path && out, "null argument");
    auto c = std::make_unique<hopnav_config>();
    c->run = load_run_config(path);
    *out = c.release();
  });
}

int hopnav_config_from_json(const char* text, hopnav_config** out) {
  return guard([&] {
    require(text && out, "null argument");
    auto c = std::make_unique<hopnav_config>();
    c->run = json::parse(text).get<RunConfig>();
    c->run.validate();
    *out = c.release();
  });
}

int hopnav_config_to_json(const hopnav_config* config, char** out) {
  return guard([&] {
    require(config && out, "null argument");
    *out = dup_string(json(config->run).dump(2));
  });
}

int hopnav_config_set_number(hopnav_config* config, const char* key, double value) {
  return guard([&] {
    require(config && key, "null argument");
    const json current = json(config->run).value(key, json());
    if (current.is_number_integer() || current.is_number_unsigned()) {
      if (value != static_cast<double>(static_cast<std::int64_t>(value)))
        throw Error(ErrorCode::ConfigError, std::string("config key '") + key + "' takes an integer");
      if (current.is_number_unsigned() && value >= 0.0) set_key(config->run, key, static_cast<std::uint64_t>(value));
      else set_key(config->run, key, static_cast<std::int64_t>(value));
    } else {
      set_key(config->run, key, value);
    }
  });
}

int hopnav_config_set_string(hopnav_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config && key && value, "null argument");
    set_key(config->run, key, std::string(value));
  });
}

int hopnav_config_get_number(const hopnav_config* config, const char* key, double* out) {
  return guard([&] {
    require(config && key && out, "null argument");
    const json j = config->run;
    if (!j.contains(key) || !j[key].is_number())
      throw Error(ErrorCode::ConfigError, std::string("no numeric config key '") + key + "'");
    *out = j[key].get<double>();
  });
}

void hopnav_config_destroy(hopnav_config* config) { delete config; }

int hopnav_run_experiment(const hopnav_runner* runner, const hopnav_env* env, const hopnav_config* config,
                          hopnav_logs** out) {
  return guard([&] {
    require(runner && env && config && out, "null argument");
    auto l = std::make_unique<hopnav_logs>();
    l->logs = runner->runner->run_experiment(env->env, config->run);
    *out = l.release();
  });
}

size_t hopnav_logs_count(const hopnav_logs* logs) { return logs ? logs->logs.size() : 0; }

int hopnav_logs_summary(const hopnav_logs* logs, size_t index, hopnav_run_summary* out) {
  return guard([&] {
    require(logs && out, "null argument");
    require(index < logs->logs.size(), "log index out of range");
    const RunLog& l = logs->logs[index];
    out->seed = l.seed;
    out->run_index = l.run_index;
    out->outcome = static_cast<int>(l.outcome);
    out->steps = l.steps;
    out->switch_step = l.switch_step;
    out->backups = static_cast<int>(std::count_if(l.hops.begin(), l.hops.end(), [](const HopRecord& h) { return h.backup; }));
    out->total_reward = l.total_reward;
  });
}

int hopnav_logs_to_json(const hopnav_logs* logs, size_t index, char** out) {
  return guard([&] {
    require(logs && out, "null argument");
    require(index < logs->logs.size(), "log index out of range");
    *out = dup_string(json(logs->logs[index]).dump(2));
  });
}

int hopnav_logs_load(const char* path, hopnav_logs** out) {
  return guard([&] {
    require(path && out, "null argument");
    auto l = std::make_unique<hopnav_logs>();
    RunLog log;
    try {
      log = json::parse(read_text(path)).get<RunLog>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, std::string(path) + ": " + e.what());
    }
    l->logs.push_back(std::move(log));
    *out = l.release();
  });
}

int hopnav_logs_emit(const hopnav_logs* logs, const hopnav_env* env, const char* directory) {
  return guard([&] {
    require(logs && env && directory, "null argument");
    emit_outputs(env->env, logs->logs, directory);
  });
}

int hopnav_render_svg(const hopnav_logs* logs, size_t index, const hopnav_env* env, const char* path) {
  return guard([&] {
    require(logs && env && path, "null argument");
    require(index < logs->logs.size(), "log index out of range");
    write_text(path, trajectory_svg(env->env, logs->logs[index]));
  });
}

void hopnav_logs_destroy(hopnav_logs* logs) { delete logs; }

int hopnav_sweep_run(const hopnav_runner* runner, const hopnav_env* env, const hopnav_config* config,
                     const double* p_values, size_t p_count, const double* eps_values, size_t eps_count, int runs,
                     hopnav_sweep** out) {
  return guard([&] {
    require(runner && env && config && out, "null argument");
    require(p_values && eps_values && p_count > 0 && eps_count > 0, "empty sweep grid");
    auto s = std::make_unique<hopnav_sweep>();
    s->result = runner->runner->sweep_switching(env->env, config->run, {p_values, p_values + p_count},
                                                {eps_values, eps_values + eps_count}, runs);
    *out = s.release();
  });
}

int hopnav_sweep_cell_get(const hopnav_sweep* sweep, size_t ip, size_t ie, hopnav_sweep_cell* out) {
  return guard([&] {
    require(sweep && out, "null argument");
    require(ip < sweep->result.p_values.size() && ie < sweep->result.eps_values.size(), "sweep index out of range");
    const SweepCell& c = sweep->result.at(ip, ie);
    *out = {c.p, c.eps, c.runs, c.completed, c.mean_reward, c.mean_steps};
  });
}

int hopnav_sweep_emit(const hopnav_sweep* sweep, const char* directory) {
  return guard([&] {
    require(sweep && directory, "null argument");
    emit_sweep(sweep->result, directory);
  });
}

void hopnav_sweep_destroy(hopnav_sweep* sweep) { delete sweep; }

int hopnav_tradeoff_bounds(double c, double eps, double product_size, hopnav_bounds* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const TradeoffBounds b = tradeoff_bounds(c, eps, product_size);
    *out = {b.m_switch, b.m_ltl, b.rl_proportion};
  });
}

}  // extern "C"
