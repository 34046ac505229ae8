// hopnav command-line driver. Talks to the library only through hopnav.h.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hopnav/hopnav.h"

namespace {

struct Failure {
  int status;
  std::string message;
};

void check(int status) {
  if (status != HOPNAV_OK) throw Failure{status, hopnav_last_error()};
}

int exit_code(int status) {
  switch (status) {
    case HOPNAV_INVALID_ARGUMENT:
    case HOPNAV_PARSE_ERROR:
    case HOPNAV_NONDETERMINISTIC_TRANSITION:
    case HOPNAV_UNKNOWN_STATE_REFERENCE:
    case HOPNAV_ALPHABET_MISMATCH:
    case HOPNAV_NON_TILING:
    case HOPNAV_CONFIG_ERROR:
    case HOPNAV_IO_ERROR:
      return 2;
    case HOPNAV_NON_CONVERGENCE:
    case HOPNAV_INITIAL_STATE_VIOLATING:
    case HOPNAV_NO_ELIGIBLE_ACTION:
    case HOPNAV_SATISFACTION_UNREACHABLE:
      return 3;
    default:
      return 1;
  }
}

// Owning wrapper for the C handles.
template <class T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Model = Handle<hopnav_model, hopnav_model_destroy>;
using Runner = Handle<hopnav_runner, hopnav_runner_destroy>;
using Env = Handle<hopnav_env, hopnav_env_destroy>;
using Config = Handle<hopnav_config, hopnav_config_destroy>;
using Logs = Handle<hopnav_logs, hopnav_logs_destroy>;
using Sweep = Handle<hopnav_sweep, hopnav_sweep_destroy>;

struct Common {
  std::string env = "case-a";
  std::string config;
  std::string model = "hop_model.bin";
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> batch;
  std::optional<double> psat, c, eps, p_rl_ee;
  std::optional<std::string> reward_mode;
};

void add_common(CLI::App* cmd, Common& o, bool with_runs) {
  cmd->add_option("--env", o.env, "environment file or builtin (case-a, case-b, micro)");
  cmd->add_option("--config", o.config, "run configuration JSON");
  cmd->add_option("--model", o.model, "trained hop model");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "base seed");
  if (with_runs) cmd->add_option("--runs", o.runs, "episodes");
  cmd->add_option("--psat", o.psat, "required satisfaction probability");
  cmd->add_option("--batch", o.batch, "hops between GP refits");
  cmd->add_option("--c", o.c, "goal-reaching RL probability scale");
  cmd->add_option("--eps", o.eps, "goal-reaching decay rate");
  cmd->add_option("--p-rl-ee", o.p_rl_ee, "exploration RL probability");
  cmd->add_option("--reward-mode", o.reward_mode, "known or unknown")->check(CLI::IsMember({"known", "unknown"}));
}

void load_env(const std::string& name, Env& env) {
  if (name == "case-a" || name == "case-b" || name == "micro") check(hopnav_env_builtin(name.c_str(), env.out()));
  else check(hopnav_env_load(name.c_str(), env.out()));
}

void load_config(const Common& o, Config& cfg) {
  if (o.config.empty()) check(hopnav_config_create(cfg.out()));
  else check(hopnav_config_load(o.config.c_str(), cfg.out()));
  const auto set = [&](const char* key, auto value) {
    if (value) check(hopnav_config_set_number(cfg.get(), key, static_cast<double>(*value)));
  };
  set("seed", o.seed);
  set("runs", o.runs);
  set("batch", o.batch);
  set("p_sat", o.psat);
  set("c", o.c);
  set("eps", o.eps);
  set("p_rl_ee", o.p_rl_ee);
  if (o.reward_mode) check(hopnav_config_set_string(cfg.get(), "reward_mode", o.reward_mode->c_str()));
  check(hopnav_config_set_string(cfg.get(), "output_dir", o.out.c_str()));
}

void make_runner(const Common& o, Model& model, Runner& runner) {
  if (!std::filesystem::exists(o.model))
    throw Failure{HOPNAV_IO_ERROR, "no hop model at '" + o.model + "'; run train-model first"};
  check(hopnav_model_load(o.model.c_str(), model.out()));
  const std::string gait = o.model + ".gait.json";
  check(hopnav_runner_create(model.get(), 4.0, gait.c_str(), runner.out()));
}

const char* outcome_text(int o) {
  switch (o) {
    case HOPNAV_SATISFIED: return "satisfied";
    case HOPNAV_VIOLATED: return "violated";
    default: return "step-cap";
  }
}

void report(const Logs& logs) {
  const std::size_t n = hopnav_logs_count(logs.get());
  int satisfied = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hopnav_run_summary s;
    check(hopnav_logs_summary(logs.get(), i, &s));
    satisfied += s.outcome == HOPNAV_SATISFIED;
    std::printf("run %d seed %llu %s steps %d reward %.2f switch %d backups %d\n", s.run_index,
                static_cast<unsigned long long>(s.seed), outcome_text(s.outcome), s.steps, s.total_reward,
                s.switch_step, s.backups);
  }
  if (n > 1) std::printf("satisfied %d / %zu\n", satisfied, n);
}

int episodes(const Common& o, bool single) {
  Model model;
  Runner runner;
  Env env;
  Config cfg;
  load_env(o.env, env);
  load_config(o, cfg);
  if (single) check(hopnav_config_set_number(cfg.get(), "runs", 1));
  make_runner(o, model, runner);
  Logs logs;
  check(hopnav_run_experiment(runner.get(), env.get(), cfg.get(), logs.out()));
  check(hopnav_logs_emit(logs.get(), env.get(), o.out.c_str()));
  report(logs);
  return 0;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    try {
      out.push_back(std::stod(text.substr(start, end - start)));
    } catch (const std::exception&) {
      throw Failure{HOPNAV_CONFIG_ERROR, "bad number list '" + text + "'"};
    }
    start = end + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hopping-robot navigation under temporal-logic goals"};
  app.require_subcommand(1);

  hopnav_train_options train;
  hopnav_train_options_default(&train);
  std::string train_out = "hop_model.bin";
  auto* cmd_train = app.add_subcommand("train-model", "simulate hops, fit the hop model, measure its control error");
  cmd_train->add_option("--out", train_out, "model file");
  cmd_train->add_option("--samples", train.samples, "simulated hops");
  cmd_train->add_option("--seed", train.seed, "data and initialization seed");
  cmd_train->add_option("--epochs", train.epochs, "training epochs");
  cmd_train->add_option("--probes", train.probes, "round-trip targets for the control error");

  Common run_opts;
  auto* cmd_run = app.add_subcommand("run", "one episode");
  add_common(cmd_run, run_opts, false);

  Common exp_opts;
  auto* cmd_exp = app.add_subcommand("experiment", "several episodes sharing reward knowledge");
  add_common(cmd_exp, exp_opts, true);

  Common sweep_opts;
  std::string p_list = "0.25,0.5,0.75", eps_list = "0.0025,0.005,0.0075";
  auto* cmd_sweep = app.add_subcommand("sweep", "grid over the switching parameters");
  add_common(cmd_sweep, sweep_opts, true);
  cmd_sweep->add_option("--p", p_list, "comma-separated P values (sets P_RL,ee and C)");
  cmd_sweep->add_option("--eps-values", eps_list, "comma-separated decay rates");

  double b_c = 0.5, b_eps = 0.005, b_size = 675;
  auto* cmd_bounds = app.add_subcommand("bounds", "trade-off bounds of the goal-reaching policy");
  cmd_bounds->add_option("--c", b_c, "RL probability scale");
  cmd_bounds->add_option("--eps", b_eps, "decay rate");
  cmd_bounds->add_option("--size", b_size, "product state count");

  std::string r_log, r_env = "case-a", r_out = "trajectory.svg";
  auto* cmd_render = app.add_subcommand("render", "SVG of a logged episode");
  cmd_render->add_option("--log", r_log, "log_<i>.json file")->required();
  cmd_render->add_option("--env", r_env, "environment file or builtin");
  cmd_render->add_option("--out", r_out, "SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      Model model;
      check(hopnav_model_train(&train, model.out()));
      check(hopnav_model_save(model.get(), train_out.c_str()));
      hopnav_model_info info;
      check(hopnav_model_info_get(model.get(), &info));
      std::printf("samples %llu loss %.6g validation_rmse %.4f control_error %.4f\n",
                  static_cast<unsigned long long>(info.sample_count), info.final_loss, info.validation_rmse,
                  info.control_error);
      return 0;
    }
    if (cmd_run->parsed()) return episodes(run_opts, true);
    if (cmd_exp->parsed()) return episodes(exp_opts, false);
    if (cmd_sweep->parsed()) {
      const auto ps = parse_list(p_list);
      const auto es = parse_list(eps_list);
      Model model;
      Runner runner;
      Env env;
      Config cfg;
      load_env(sweep_opts.env, env);
      load_config(sweep_opts, cfg);
      double runs = 10;
      if (sweep_opts.runs) runs = *sweep_opts.runs;
      make_runner(sweep_opts, model, runner);
      Sweep sweep;
      check(hopnav_sweep_run(runner.get(), env.get(), cfg.get(), ps.data(), ps.size(), es.data(), es.size(),
                             static_cast<int>(runs), sweep.out()));
      check(hopnav_sweep_emit(sweep.get(), sweep_opts.out.c_str()));
      for (std::size_t i = 0; i < ps.size(); ++i) {
        for (std::size_t j = 0; j < es.size(); ++j) {
          hopnav_sweep_cell c;
          check(hopnav_sweep_cell_get(sweep.get(), i, j, &c));
          std::printf("P %.4g eps %.4g completed %d/%d reward %.2f steps %.2f\n", c.p, c.eps, c.completed, c.runs,
                      c.mean_reward, c.mean_steps);
        }
      }
      return 0;
    }
    if (cmd_bounds->parsed()) {
      hopnav_bounds b;
      check(hopnav_tradeoff_bounds(b_c, b_eps, b_size, &b));
      std::printf("m_switch %.6f m_ltl %.6f rl_proportion %.6f\n", b.m_switch, b.m_ltl, b.rl_proportion);
      return 0;
    }
    if (cmd_render->parsed()) {
      Env env;
      Logs logs;
      load_env(r_env, env);
      check(hopnav_logs_load(r_log.c_str(), logs.out()));
      check(hopnav_render_svg(logs.get(), 0, env.get(), r_out.c_str()));
      return 0;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return exit_code(f.status);
  }
  return 1;
}
