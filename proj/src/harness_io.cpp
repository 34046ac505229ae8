#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hopnav/error.hpp"
#include "hopnav/harness.hpp"

namespace hopnav {

namespace {

using nlohmann::json;

// Shortest representation that round-trips.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

json rects_to_json(const std::vector<CellRect>& rects) {
  json a = json::array();
  for (const auto& r : rects) a.push_back({r.x0, r.y0, r.x1, r.y1});
  return a;
}

std::vector<CellRect> rects_from_json(const json& j) {
  std::vector<CellRect> out;
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != 4) throw Error(ErrorCode::ConfigError, "cell rectangle must be [x0, y0, x1, y1]");
    out.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()});
  }
  return out;
}

json vec2(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 vec2(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }

Outcome outcome_from(const std::string& s) {
  if (s == "satisfied") return Outcome::Satisfied;
  if (s == "violated") return Outcome::Violated;
  return Outcome::StepCap;
}

}  // namespace

// ---------------------------------------------------------------- json

void to_json(json& j, const EnvironmentConfig& env) {
  j = json::object();
  j["name"] = env.name;
  j["lower"] = vec2(env.lower);
  j["upper"] = vec2(env.upper);
  j["cell_size"] = env.cell_size;
  j["start"] = {env.start[0], env.start[1]};
  j["labels"] = json::array();
  for (const auto& l : env.labels) j["labels"].push_back({{"name", l.name}, {"cells", rects_to_json(l.cells)}});
  j["rewards"] = json::array();
  for (const auto& w : env.rewards) {
    j["rewards"].push_back({{"name", w.name}, {"value", w.value}, {"cells", rects_to_json(w.cells)}});
  }
  const auto& p = env.perturbation;
  j["perturbation"] = {{"seed", p.seed},
                       {"lengthscale", p.lengthscale},
                       {"sigma", p.sigma},
                       {"noise_sigma", p.noise_sigma},
                       {"noise_support", p.noise_support},
                       {"enabled", p.enabled}};
  j["dra"] = env.dra;
  j["goal"] = env.goal;
  j["hazard"] = env.hazard;
}

void from_json(const json& j, EnvironmentConfig& env) {
  try {
    get_opt(j, "name", env.name);
    if (j.contains("lower")) env.lower = vec2(j["lower"]);
    if (j.contains("upper")) env.upper = vec2(j["upper"]);
    get_opt(j, "cell_size", env.cell_size);
    if (j.contains("start")) env.start = {j["start"].at(0).get<int>(), j["start"].at(1).get<int>()};
    if (j.contains("labels")) {
      env.labels.clear();
      for (const auto& l : j["labels"]) env.labels.push_back({l.at("name").get<std::string>(), rects_from_json(l.at("cells"))});
    }
    if (j.contains("rewards")) {
      env.rewards.clear();
      for (const auto& w : j["rewards"]) {
        env.rewards.push_back(
            {w.value("name", std::string()), w.at("value").get<double>(), rects_from_json(w.at("cells"))});
      }
    }
    if (j.contains("perturbation")) {
      const json& p = j["perturbation"];
      get_opt(p, "seed", env.perturbation.seed);
      get_opt(p, "lengthscale", env.perturbation.lengthscale);
      get_opt(p, "sigma", env.perturbation.sigma);
      get_opt(p, "noise_sigma", env.perturbation.noise_sigma);
      get_opt(p, "noise_support", env.perturbation.noise_support);
      get_opt(p, "enabled", env.perturbation.enabled);
    }
    get_opt(j, "dra", env.dra);
    get_opt(j, "goal", env.goal);
    get_opt(j, "hazard", env.hazard);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("environment: ") + e.what());
  }
}

void to_json(json& j, const RunConfig& run) {
  j = json::object();
  j["seed"] = run.seed;
  j["run_index"] = run.run_index;
  j["p_sat"] = run.p_sat;
  j["batch"] = run.batch;
  j["max_batches"] = run.max_batches;
  j["p_rl_ee"] = run.p_rl_ee;
  j["c"] = run.c;
  j["eps"] = run.eps;
  j["reward_mode"] = run.reward_mode == RewardMode::Known ? "known" : "unknown";
  j["runs"] = run.runs;
  j["output_dir"] = run.output_dir;
  j["inducing"] = run.inducing;
  j["kernel"] = {{"lengthscale", run.kernel.lengthscale},
                 {"signal_sigma", run.kernel.signal_sigma},
                 {"noise_sigma", run.kernel.noise_sigma},
                 {"optimize_lengthscale", run.kernel.optimize_lengthscale}};
  j["z_score"] = run.z_score;
  j["control_error"] = run.control_error;
  j["backup_threshold"] = run.backup_threshold;
  j["weights"] = {{"displacement", run.weights.displacement},
                  {"velocity", run.weights.velocity},
                  {"bound", run.weights.bound}};
  j["q"] = {{"gamma", run.q.gamma}, {"learning_rate", run.q.learning_rate}, {"exploration", run.q.exploration}};
}

void from_json(const json& j, RunConfig& run) {
  try {
    get_opt(j, "seed", run.seed);
    get_opt(j, "run_index", run.run_index);
    get_opt(j, "p_sat", run.p_sat);
    get_opt(j, "batch", run.batch);
    get_opt(j, "max_batches", run.max_batches);
    get_opt(j, "p_rl_ee", run.p_rl_ee);
    get_opt(j, "c", run.c);
    get_opt(j, "eps", run.eps);
    if (j.contains("reward_mode")) {
      const auto m = j["reward_mode"].get<std::string>();
      if (m == "known") run.reward_mode = RewardMode::Known;
      else if (m == "unknown") run.reward_mode = RewardMode::Unknown;
      else throw Error(ErrorCode::ConfigError, "reward_mode must be known or unknown");
    }
    get_opt(j, "runs", run.runs);
    get_opt(j, "output_dir", run.output_dir);
    get_opt(j, "inducing", run.inducing);
    if (j.contains("kernel")) {
      const json& k = j["kernel"];
      get_opt(k, "lengthscale", run.kernel.lengthscale);
      get_opt(k, "signal_sigma", run.kernel.signal_sigma);
      get_opt(k, "noise_sigma", run.kernel.noise_sigma);
      get_opt(k, "optimize_lengthscale", run.kernel.optimize_lengthscale);
    }
    get_opt(j, "z_score", run.z_score);
    get_opt(j, "control_error", run.control_error);
    get_opt(j, "backup_threshold", run.backup_threshold);
    if (j.contains("weights")) {
      get_opt(j["weights"], "displacement", run.weights.displacement);
      get_opt(j["weights"], "velocity", run.weights.velocity);
      get_opt(j["weights"], "bound", run.weights.bound);
    }
    if (j.contains("q")) {
      get_opt(j["q"], "gamma", run.q.gamma);
      get_opt(j["q"], "learning_rate", run.q.learning_rate);
      get_opt(j["q"], "exploration", run.q.exploration);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("run config: ") + e.what());
  }
}

void to_json(json& j, const RunLog& log) {
  j = json::object();
  j["seed"] = log.seed;
  j["run_index"] = log.run_index;
  j["outcome"] = outcome_name(log.outcome);
  j["steps"] = log.steps;
  j["total_reward"] = log.total_reward;
  j["switch_step"] = log.switch_step;
  json hops = json::array();
  for (const auto& h : log.hops) {
    hops.push_back({{"hop", h.hop},
                    {"start", vec2(h.start)},
                    {"end", vec2(h.end)},
                    {"cell", h.cell},
                    {"product_state", h.product_state},
                    {"next_cell", h.next_cell},
                    {"requested_action", h.requested_action},
                    {"action", h.action},
                    {"backup", h.backup},
                    {"branch", branch_name(h.branch)},
                    {"mode", mode_name(h.mode)},
                    {"pitch", h.placement.pitch},
                    {"yaw", h.placement.yaw},
                    {"cost", h.cost},
                    {"predicted", vec2(h.predicted)},
                    {"realized", vec2(h.realized)},
                    {"reward", h.reward}});
  }
  j["hops"] = std::move(hops);
  json batches = json::array();
  for (const auto& b : log.batches) {
    batches.push_back({{"step", b.step},
                       {"samples", b.samples},
                       {"mode", mode_name(b.mode)},
                       {"switched", b.switched},
                       {"recovery", b.recovery},
                       {"p_lower", b.p_lower},
                       {"mean_x", b.mean_x},
                       {"mean_y", b.mean_y},
                       {"std_x", b.std_x},
                       {"std_y", b.std_y}});
  }
  j["batches"] = std::move(batches);
}

void from_json(const json& j, RunLog& log) {
  try {
    log = RunLog{};
    log.seed = j.at("seed").get<std::uint64_t>();
    log.run_index = j.at("run_index").get<int>();
    log.outcome = outcome_from(j.at("outcome").get<std::string>());
    log.steps = j.at("steps").get<int>();
    log.total_reward = j.at("total_reward").get<double>();
    log.switch_step = j.at("switch_step").get<int>();
    for (const auto& h : j.at("hops")) {
      HopRecord r;
      r.hop = h.at("hop").get<int>();
      r.start = vec2(h.at("start"));
      r.end = vec2(h.at("end"));
      r.cell = h.at("cell").get<int>();
      r.product_state = h.at("product_state").get<int>();
      r.next_cell = h.at("next_cell").get<int>();
      r.requested_action = h.at("requested_action").get<int>();
      r.action = h.at("action").get<int>();
      r.backup = h.at("backup").get<bool>();
      r.branch = h.at("branch").get<std::string>() == "rl" ? Branch::Rl : Branch::Ltl;
      r.mode = h.at("mode").get<std::string>() == "exploration" ? PolicyMode::Exploration : PolicyMode::GoalReaching;
      r.placement = {h.at("pitch").get<double>(), h.at("yaw").get<double>()};
      r.cost = h.at("cost").get<double>();
      r.predicted = vec2(h.at("predicted"));
      r.realized = vec2(h.at("realized"));
      r.reward = h.at("reward").get<double>();
      log.hops.push_back(r);
    }
    for (const auto& b : j.at("batches")) {
      BatchRecord r;
      r.step = b.at("step").get<int>();
      r.samples = b.at("samples").get<int>();
      r.mode = b.at("mode").get<std::string>() == "exploration" ? PolicyMode::Exploration : PolicyMode::GoalReaching;
      r.switched = b.at("switched").get<bool>();
      r.recovery = b.at("recovery").get<bool>();
      r.p_lower = b.at("p_lower").get<double>();
      b.at("mean_x").get_to(r.mean_x);
      b.at("mean_y").get_to(r.mean_y);
      b.at("std_x").get_to(r.std_x);
      b.at("std_y").get_to(r.std_y);
      log.batches.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("run log: ") + e.what());
  }
}

void to_json(json& j, const SweepResult& sweep) {
  j = json::object();
  j["p_values"] = sweep.p_values;
  j["eps_values"] = sweep.eps_values;
  j["cells"] = json::array();
  for (const auto& c : sweep.cells) {
    j["cells"].push_back({{"p", c.p},
                          {"eps", c.eps},
                          {"runs", c.runs},
                          {"completed", c.completed},
                          {"mean_reward", c.completed ? json(c.mean_reward) : json(nullptr)},
                          {"mean_steps", c.completed ? json(c.mean_steps) : json(nullptr)}});
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

EnvironmentConfig load_environment(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  EnvironmentConfig env = j.get<EnvironmentConfig>();
  env.validate();
  return env;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  RunConfig run = j.get<RunConfig>();
  run.validate();
  return run;
}

// ---------------------------------------------------------------- csv / svg

std::string trajectory_csv(const RunLog& log) {
  std::string out = "hop,start_x,start_y,x,y,product_state,action,branch,mode,backup,reward\n";
  for (const auto& h : log.hops) {
    out += std::to_string(h.hop) + ',' + num(h.start.x()) + ',' + num(h.start.y()) + ',' + num(h.end.x()) + ',' +
           num(h.end.y()) + ',' + std::to_string(h.product_state) + ',' + action_name(h.action) + ',' +
           branch_name(h.branch) + ',' + mode_name(h.mode) + ',' + (h.backup ? "1" : "0") + ',' + num(h.reward) +
           '\n';
  }
  return out;
}

std::string metrics_csv(std::span<const RunLog> logs) {
  std::string out = "run,seed,outcome,steps,total_reward,switch_step,batches\n";
  for (const auto& l : logs) {
    out += std::to_string(l.run_index) + ',' + std::to_string(l.seed) + ',' + outcome_name(l.outcome) + ',' +
           std::to_string(l.steps) + ',' + num(l.total_reward) + ',' + std::to_string(l.switch_step) + ',' +
           std::to_string(l.batches.size()) + '\n';
  }
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "p,eps,runs,completed,mean_reward,mean_steps\n";
  for (const auto& c : sweep.cells) {
    out += num(c.p) + ',' + num(c.eps) + ',' + std::to_string(c.runs) + ',' + std::to_string(c.completed) + ',' +
           num(c.mean_reward) + ',' + num(c.mean_steps) + '\n';
  }
  return out;
}

std::string trajectory_svg(const EnvironmentConfig& env, const RunLog& log) {
  const Partition part = env.partition();
  const double px = 40.0 / env.cell_size;  // pixels per metre
  const double w = (env.upper.x() - env.lower.x()) * px;
  const double h = (env.upper.y() - env.lower.y()) * px;
  const auto sx = [&](double x) { return num((x - env.lower.x()) * px); };
  const auto sy = [&](double y) { return num(h - (y - env.lower.y()) * px); };
  const std::vector<double> reward = env.reward_map();

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
                    "\" viewBox=\"0 0 " + num(w) + ' ' + num(h) + "\">\n";
  for (int q = 0; q < part.size(); ++q) {
    std::string fill = "#ffffff";
    if (reward[q] >= 10.0) fill = "#9b59b6";
    else if (reward[q] > 0.0) fill = "#d7bde2";
    else if (reward[q] < 0.0) fill = "#f5b7d1";
    if (part.has_label(q, env.hazard)) fill = "#e74c3c";
    if (part.has_label(q, env.goal)) fill = "#2ecc71";
    if (q == env.start_cell()) fill = "#3498db";
    const Vec2 lo = part.cell_lower(q);
    out += "<rect x=\"" + sx(lo.x()) + "\" y=\"" + sy(lo.y() + env.cell_size) + "\" width=\"" + num(px * env.cell_size) +
           "\" height=\"" + num(px * env.cell_size) + "\" fill=\"" + fill + "\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n";
  }
  std::string points;
  if (!log.hops.empty()) {
    points = sx(log.hops.front().start.x()) + ',' + sy(log.hops.front().start.y());
    for (const auto& hop : log.hops) points += ' ' + sx(hop.end.x()) + ',' + sy(hop.end.y());
  }
  out += "<polyline fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
  out += "</svg>\n";
  return out;
}

void emit_outputs(const EnvironmentConfig& env, std::span<const RunLog> logs, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + directory + ": " + ec.message());
  const std::filesystem::path dir(directory);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const std::string tag = std::to_string(i);
    write_text((dir / ("trajectory_" + tag + ".csv")).string(), trajectory_csv(logs[i]));
    write_text((dir / ("trajectory_" + tag + ".svg")).string(), trajectory_svg(env, logs[i]));
    write_text((dir / ("log_" + tag + ".json")).string(), json(logs[i]).dump(1) + '\n');
  }
  write_text((dir / "metrics.csv").string(), metrics_csv(logs));
}

void emit_sweep(const SweepResult& sweep, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + directory + ": " + ec.message());
  write_text((std::filesystem::path(directory) / "sweep.csv").string(), sweep_csv(sweep));
}

}  // namespace hopnav
