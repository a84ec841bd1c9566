#include "diffpush/bench/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "diffpush/errors.hpp"
#include "diffpush/random.hpp"

namespace diffpush::bench {

namespace {

// Strict reader over one JSON object: every key must be consumed.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) {
      throw ConfigError(where_ + " must be a JSON object");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T, class Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string name;
    get(key, name);
    if (!name.empty()) {
      out = parse(name);
    }
  }

  const Json* sub(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) {
        throw ConfigError("unknown key '" + where_ + "." + key + "'");
      }
    }
  }

  const std::string& where() const { return where_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Solver parse_solver(const std::string& s) {
  if (s == "ddim") return Solver::ddim;
  if (s == "ddpm") return Solver::ddpm;
  throw ConfigError("unknown solver '" + s + "'");
}

PolicyKind parse_policy(const std::string& s) {
  if (s == "diffusion") return PolicyKind::diffusion;
  if (s == "weak") return PolicyKind::weak;
  if (s == "expert") return PolicyKind::expert;
  throw ConfigError("unknown policy '" + s + "'");
}

Json guidance_json(const guidance::GuidanceSpec& g) {
  return {{"kind", guidance::to_string(g.kind)}, {"w", g.w},
          {"delta_t", g.delta_t},                {"noise_scale", g.noise_scale},
          {"tsg_scale", g.tsg_scale},            {"tsg_alpha", g.tsg_alpha}};
}

guidance::GuidanceSpec parse_guidance(const Json& j, const std::string& where,
                                      guidance::GuidanceSpec g) {
  Fields f(j, where);
  f.get_enum("kind", g.kind, guidance::parse_guidance_kind);
  f.get("w", g.w);
  f.get("delta_t", g.delta_t);
  f.get("noise_scale", g.noise_scale);
  f.get("tsg_scale", g.tsg_scale);
  f.get("tsg_alpha", g.tsg_alpha);
  f.finish();
  g.validate();
  return g;
}

Json executor_json(const executor::ExecutorConfig& e) {
  return {{"mode", executor::to_string(e.mode)},
          {"action_horizon", e.action_horizon},
          {"tau", e.tau},
          {"metric", executor::to_string(e.metric)},
          {"lambda", e.lambda},
          {"bid_samples", e.bid_samples},
          {"bid_window", e.bid_window},
          {"retain_only", e.retain_only}};
}

executor::ExecutorConfig parse_executor(const Json& j, const std::string& where,
                                        executor::ExecutorConfig e) {
  Fields f(j, where);
  f.get_enum("mode", e.mode, executor::parse_exec_mode);
  f.get("action_horizon", e.action_horizon);
  f.get("tau", e.tau);
  f.get_enum("metric", e.metric, executor::parse_metric);
  f.get("lambda", e.lambda);
  f.get("bid_samples", e.bid_samples);
  f.get("bid_window", e.bid_window);
  f.get("retain_only", e.retain_only);
  f.finish();
  return e;
}

Threshold parse_threshold(const Json& j, const std::string& where) {
  Threshold t;
  Fields f(j, where);
  f.get("method", t.method);
  f.get("p", t.p);
  f.get("metric", t.metric);
  double v = 0.0;
  if (f.sub("min")) {
    f.get("min", v);
    t.min = v;
  }
  if (f.sub("max")) {
    f.get("max", v);
    t.max = v;
  }
  f.finish();
  if (t.method.empty() || (t.metric != "coverage" && t.metric != "success")) {
    throw ConfigError(where + " needs a method and metric coverage|success");
  }
  return t;
}

}  // namespace

std::string to_string(Solver s) { return s == Solver::ddim ? "ddim" : "ddpm"; }

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::diffusion: return "diffusion";
    case PolicyKind::weak: return "weak";
    case PolicyKind::expert: return "expert";
  }
  return "diffusion";
}

std::string hex_hash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  Fields top(j, "config");
  if (const Json* e = top.sub("env")) {
    Fields f(*e, "env");
    f.get("max_steps", c.env.max_steps);
    f.get("contact_radius", c.env.contact_radius);
    f.get("goal_radius", c.env.goal_radius);
    f.get("max_speed", c.env.max_speed);
    f.get("success_hold", c.env.success_hold);
    std::vector<double> goal{c.env.goal.x, c.env.goal.y};
    f.get("goal", goal);
    if (goal.size() != 2) {
      throw ConfigError("env.goal must have two entries");
    }
    c.env.goal = {goal[0], goal[1]};
    f.get("randomize_goal", c.env.randomize_goal);
    f.get_enum("perturbation", c.perturbation, env::parse_perturbation_kind);
    f.finish();
  }
  if (const Json* d = top.sub("dataset")) {
    Fields f(*d, "dataset");
    f.get("num_episodes", c.dataset.num_episodes);
    f.get("seed", c.dataset.seed);
    f.get("max_attempt_factor", c.dataset.max_attempt_factor);
    f.get("action_noise", c.dataset.action_noise);
    f.finish();
  }
  if (const Json* m = top.sub("model")) {
    Fields f(*m, "model");
    f.get("horizon", c.model.horizon);
    f.get("history_len", c.model.history_len);
    f.get("time_embed_dim", c.model.time_embed_dim);
    f.get("hidden", c.model.hidden);
    f.get("null_token", c.model.null_token);
    f.get("init_seed", c.init_seed);
    f.finish();
  }
  if (const Json* d = top.sub("diffusion")) {
    Fields f(*d, "diffusion");
    f.get("steps", c.diffusion.steps);
    f.get_enum("schedule", c.diffusion.schedule, diffusion::parse_schedule_kind);
    f.get_enum("solver", c.diffusion.solver, parse_solver);
    f.get("inference_steps", c.diffusion.inference_steps);
    f.get("clip_x0", c.diffusion.clip_x0);
    f.finish();
  }
  if (const Json* t = top.sub("training")) {
    Fields f(*t, "training");
    f.get("steps", c.training.steps);
    f.get("batch_size", c.training.batch_size);
    f.get("lr", c.training.lr);
    f.get("lr_min", c.training.lr_min);
    f.get("warmup", c.training.warmup);
    f.get("seed", c.training.seed);
    f.get("cond_dropout", c.training.cond_dropout);
    f.get("weak_fraction", c.training.weak_fraction);
    f.get("log_every", c.training.log_every);
    f.get("ema_decay", c.training.ema_decay);
    f.finish();
  }
  if (const Json* g = top.sub("guidance")) {
    c.guidance = parse_guidance(*g, "guidance", c.guidance);
  }
  if (const Json* e = top.sub("executor")) {
    c.executor = parse_executor(*e, "executor", c.executor);
  }
  if (const Json* e = top.sub("evaluation")) {
    Fields f(*e, "evaluation");
    f.get("num_episodes", c.evaluation.num_episodes);
    f.get("seeds", c.evaluation.seeds);
    f.get("p_values", c.evaluation.p_values);
    f.get("write_traces", c.evaluation.write_traces);
    if (const Json* ms = f.sub("methods")) {
      if (!ms->is_array()) {
        throw ConfigError("evaluation.methods must be an array");
      }
      c.evaluation.methods.assign(ms->begin(), ms->end());
    }
    if (const Json* ts = f.sub("thresholds")) {
      if (!ts->is_array()) {
        throw ConfigError("evaluation.thresholds must be an array");
      }
      for (std::size_t i = 0; i < ts->size(); ++i) {
        c.evaluation.thresholds.push_back(
            parse_threshold((*ts)[i], "evaluation.thresholds[" + std::to_string(i) + "]"));
      }
    }
    f.finish();
  }
  top.finish();
  c.model.obs_dim = env::kObsDim;
  c.model.action_dim = env::kActionDim;
  c.dataset.horizon = c.model.horizon;
  c.dataset.history_len = c.model.history_len;
  c.executor.horizon = c.model.horizon;
  c.executor.action_dim = env::kActionDim;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path);
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

Json ExperimentConfig::to_json() const {
  Json methods = Json::array();
  for (const auto& m : evaluation.methods) {
    methods.push_back(m);
  }
  Json thresholds = Json::array();
  for (const auto& t : evaluation.thresholds) {
    Json tj{{"method", t.method}, {"p", t.p}, {"metric", t.metric}};
    if (t.min) tj["min"] = *t.min;
    if (t.max) tj["max"] = *t.max;
    thresholds.push_back(tj);
  }
  return {
      {"env",
       {{"max_steps", env.max_steps},
        {"contact_radius", env.contact_radius},
        {"goal_radius", env.goal_radius},
        {"max_speed", env.max_speed},
        {"success_hold", env.success_hold},
        {"goal", {env.goal.x, env.goal.y}},
        {"randomize_goal", env.randomize_goal},
        {"perturbation", env::to_string(perturbation)}}},
      {"dataset",
       {{"num_episodes", dataset.num_episodes},
        {"seed", dataset.seed},
        {"max_attempt_factor", dataset.max_attempt_factor},
        {"action_noise", dataset.action_noise}}},
      {"model",
       {{"horizon", model.horizon},
        {"history_len", model.history_len},
        {"time_embed_dim", model.time_embed_dim},
        {"hidden", model.hidden},
        {"null_token", model.null_token},
        {"init_seed", init_seed}}},
      {"diffusion",
       {{"steps", diffusion.steps},
        {"schedule", diffusion::to_string(diffusion.schedule)},
        {"solver", to_string(diffusion.solver)},
        {"inference_steps", diffusion.inference_steps},
        {"clip_x0", diffusion.clip_x0}}},
      {"training",
       {{"steps", training.steps},
        {"batch_size", training.batch_size},
        {"lr", training.lr},
        {"lr_min", training.lr_min},
        {"warmup", training.warmup},
        {"seed", training.seed},
        {"cond_dropout", training.cond_dropout},
        {"weak_fraction", training.weak_fraction},
        {"log_every", training.log_every},
        {"ema_decay", training.ema_decay}}},
      {"guidance", guidance_json(guidance)},
      {"executor", executor_json(executor)},
      {"evaluation",
       {{"num_episodes", evaluation.num_episodes},
        {"seeds", evaluation.seeds},
        {"p_values", evaluation.p_values},
        {"write_traces", evaluation.write_traces},
        {"methods", methods},
        {"thresholds", thresholds}}}};
}

std::uint64_t ExperimentConfig::hash() const { return hash_name(to_json().dump()); }

void ExperimentConfig::validate() const {
  env.validate();
  model.validate();
  if (diffusion.steps < 2) {
    throw ConfigError("diffusion.steps must be >= 2");
  }
  if (diffusion.inference_steps < 1 || diffusion.inference_steps > diffusion.steps) {
    throw ConfigError("diffusion.inference_steps must lie in [1, diffusion.steps]");
  }
  if (training.batch_size == 0 || !(training.lr > 0.0) || training.log_every == 0) {
    throw ConfigError("training needs positive batch_size, lr and log_every");
  }
  if (!(training.ema_decay >= 0.0 && training.ema_decay < 1.0)) {
    throw ConfigError("training.ema_decay must lie in [0, 1)");
  }
  if (!(training.weak_fraction > 0.0 && training.weak_fraction <= 1.0)) {
    throw ConfigError("training.weak_fraction must lie in (0, 1]");
  }
  if (!(training.cond_dropout >= 0.0 && training.cond_dropout < 1.0)) {
    throw ConfigError("training.cond_dropout must lie in [0, 1)");
  }
  if (training.cond_dropout > 0.0 && !model.null_token) {
    throw ConfigError("condition dropout needs model.null_token");
  }
  if (evaluation.num_episodes == 0 || evaluation.seeds.empty() ||
      evaluation.p_values.empty()) {
    throw ConfigError("evaluation needs episodes, seeds and P values");
  }
  for (double p : evaluation.p_values) {
    if (!(p >= 0.0)) {
      throw ConfigError("P values must be >= 0");
    }
  }
  guidance.validate();
  executor.validate();
  std::set<std::string> names;
  for (const auto& m : resolve_methods()) {
    if (!names.insert(m.name).second) {
      throw ConfigError("duplicate method name '" + m.name + "'");
    }
  }
  for (const auto& t : evaluation.thresholds) {
    if (!names.count(t.method)) {
      throw ConfigError("threshold refers to unknown method '" + t.method + "'");
    }
  }
}

MethodSpec ExperimentConfig::resolve_method(const Json& overrides) const {
  MethodSpec m;
  m.guidance = guidance;
  m.executor = executor;
  m.solver = diffusion.solver;
  m.inference_steps = diffusion.inference_steps;
  Fields f(overrides, "method");
  f.get("name", m.name);
  if (m.name.empty()) {
    throw ConfigError("every evaluation method needs a name");
  }
  const std::string where = "method '" + m.name + "'";
  f.get_enum("policy", m.policy, parse_policy);
  if (const Json* g = f.sub("guidance")) {
    m.guidance = parse_guidance(*g, where + ".guidance", m.guidance);
  }
  if (const Json* e = f.sub("executor")) {
    m.executor = parse_executor(*e, where + ".executor", m.executor);
  }
  if (const Json* d = f.sub("diffusion")) {
    Fields df(*d, where + ".diffusion");
    df.get_enum("solver", m.solver, parse_solver);
    df.get("inference_steps", m.inference_steps);
    df.finish();
  }
  f.finish();
  m.executor.validate();
  if (m.inference_steps < 1 || m.inference_steps > diffusion.steps) {
    throw ConfigError(where + ": inference_steps must lie in [1, diffusion.steps]");
  }
  if (m.guidance.kind == guidance::GuidanceKind::cfg && !model.null_token) {
    throw ConfigError(where + ": CFG needs model.null_token");
  }
  return m;
}

std::vector<MethodSpec> ExperimentConfig::resolve_methods() const {
  if (evaluation.methods.empty()) {
    return {resolve_method(Json{{"name", "default"}})};
  }
  std::vector<MethodSpec> out;
  for (const auto& j : evaluation.methods) {
    out.push_back(resolve_method(j));
  }
  return out;
}

}  // namespace diffpush::bench
