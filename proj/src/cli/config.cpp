#include "o2o/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace o2o::cli {

lagrange::Controller ControllerConfig::make() const {
  switch (kind) {
    case lagrange::ControllerKind::Dual:
      return lagrange::Controller::dual(dual_lr);
    case lagrange::ControllerKind::Pid:
      return lagrange::Controller::pid(gains);
    case lagrange::ControllerKind::APid: {
      lagrange::APidCtl c = lagrange::APidCtl::with_gains(gains, alpha, beta, gamma);
      c.window_size = window;
      return lagrange::Controller::apid(c);
    }
  }
  throw ConfigError("unknown controller kind");
}

std::unique_ptr<cmdp::Environment> ExperimentConfig::make_env() const {
  if (env_name == "grid_circle") return std::make_unique<cmdp::GridCircleWorld>(grid);
  if (env_name == "point_circle") return std::make_unique<cmdp::PointCircle>(point);
  throw ConfigError("env.name: unknown environment '" + env_name + "' (expected grid_circle or point_circle)");
}

cmdp::EnvSpec ExperimentConfig::spec() const { return make_env()->spec(); }

void ExperimentConfig::resolve() {
  const cmdp::EnvSpec s = spec();
  cpq.gamma = vpa.gamma = sac.gamma = s.gamma;
  cpq.l = cpq_l ? *cpq_l : cmdp::discounted_budget(s.cost_threshold, s.gamma, s.episode_length);
  sac.hidden = cpq.hidden;
  if (data_size == 0) throw ConfigError("data.size must be positive");
  if (seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
  if (jobs < 1) throw ConfigError("run.jobs must be positive");
  if (checkpoint_every < 0) throw ConfigError("run.checkpoint_every must be >= 0");
  if (eval.probes < 2) throw ConfigError("eval.probes must be >= 2");
  if (eval.rollouts < 1 || eval.episodes < 1) throw ConfigError("eval.rollouts and eval.episodes must be positive");
  if (ctl.window < 1) throw ConfigError("ctl.window must be positive");
  s.validate();
  cpq.validate();
  vpa.validate();
  sac.validate();
}

namespace {

struct Key {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + text + "' is not a valid number");
  return v;
}

std::string show(double v) { return format_double(v); }
template <typename T>
std::string show(T v) requires std::is_integral_v<T> { return std::to_string(v); }

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number<T>(trim(item)));
  return out;
}

template <typename T>
std::string show_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + show(v[i]);
  return s;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("'" + text + "' is not a boolean (true/false)");
}

// Binds a numeric field reached through `ref`.
template <typename T, typename F>
Key num(F ref) {
  return {[ref](const ExperimentConfig& c) { return show(static_cast<T>(ref(const_cast<ExperimentConfig&>(c)))); },
          [ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_number<T>(v); }};
}

const std::map<std::string, Key>& registry() {
  using C = ExperimentConfig;
  static const std::map<std::string, Key> keys = [] {
    std::map<std::string, Key> k;
    k["env.name"] = {[](const C& c) { return c.env_name; }, [](C& c, const std::string& v) { c.env_name = v; }};
    k["env.grid.size"] = num<int>([](C& c) -> int& { return c.grid.size; });
    k["env.grid.slip"] = num<double>([](C& c) -> double& { return c.grid.slip; });
    k["env.grid.episode_length"] = num<int>([](C& c) -> int& { return c.grid.episode_length; });
    k["env.grid.gamma"] = num<double>([](C& c) -> double& { return c.grid.gamma; });
    k["env.grid.cost_threshold"] = num<double>([](C& c) -> double& { return c.grid.cost_threshold; });
    k["env.point.radius"] = num<double>([](C& c) -> double& { return c.point.radius; });
    k["env.point.band"] = num<double>([](C& c) -> double& { return c.point.band; });
    k["env.point.max_speed"] = num<double>([](C& c) -> double& { return c.point.max_speed; });
    k["env.point.reward_cap"] = num<double>([](C& c) -> double& { return c.point.reward_cap; });
    k["env.point.arena"] = num<double>([](C& c) -> double& { return c.point.arena; });
    k["env.point.start_jitter"] = num<double>([](C& c) -> double& { return c.point.start_jitter; });
    k["env.point.episode_length"] = num<int>([](C& c) -> int& { return c.point.episode_length; });
    k["env.point.gamma"] = num<double>([](C& c) -> double& { return c.point.gamma; });
    k["env.point.cost_threshold"] = num<double>([](C& c) -> double& { return c.point.cost_threshold; });

    k["data.size"] = num<std::size_t>([](C& c) -> std::size_t& { return c.data_size; });
    k["data.behavior"] = {[](const C& c) { return c.data_behavior; },
                          [](C& c, const std::string& v) { c.data_behavior = v; }};

    k["net.hidden"] = {[](const C& c) { return show_list(c.cpq.hidden); },
                       [](C& c, const std::string& v) { c.cpq.hidden = parse_list<int>(v); }};

    k["cpq.psi"] = num<double>([](C& c) -> double& { return c.cpq.psi; });
    k["cpq.l"] = {[](const C& c) { return c.cpq_l ? show(*c.cpq_l) : std::string("auto"); },
                  [](C& c, const std::string& v) {
                    if (v == "auto")
                      c.cpq_l.reset();
                    else
                      c.cpq_l = parse_number<double>(v);
                  }};
    k["cpq.tau"] = num<double>([](C& c) -> double& { return c.cpq.tau; });
    k["cpq.batch_size"] = num<int>([](C& c) -> int& { return c.cpq.batch_size; });
    k["cpq.ood_batch_size"] = num<int>([](C& c) -> int& { return c.cpq.ood_batch_size; });
    k["cpq.steps"] = num<long>([](C& c) -> long& { return c.cpq.update_count; });
    k["cpq.policy_lr"] = num<double>([](C& c) -> double& { return c.cpq.policy_lr; });
    k["cpq.q_lr"] = num<double>([](C& c) -> double& { return c.cpq.q_lr; });
    k["cpq.qc_lr"] = num<double>([](C& c) -> double& { return c.cpq.qc_lr; });
    k["cpq.next_samples"] = num<int>([](C& c) -> int& { return c.cpq.next_samples; });
    k["cpq.ood_pool_states"] = num<std::size_t>([](C& c) -> std::size_t& { return c.cpq.ood_pool_states; });
    k["cpq.ood_per_state"] = num<int>([](C& c) -> int& { return c.cpq.ood_per_state; });
    k["cpq.ood_k"] = num<int>([](C& c) -> int& { return c.cpq.ood_k; });
    k["cpq.ood_quantile"] = num<double>([](C& c) -> double& { return c.cpq.ood_quantile; });
    k["cpq.policy_entropy"] = num<double>([](C& c) -> double& { return c.cpq.policy_entropy; });

    k["vpa.enabled"] = {[](const C& c) { return std::string(c.use_vpa ? "true" : "false"); },
                        [](C& c, const std::string& v) { c.use_vpa = parse_bool(v); }};
    k["vpa.alpha"] = num<double>([](C& c) -> double& { return c.vpa.alpha; });
    k["vpa.alpha_c"] = num<double>([](C& c) -> double& { return c.vpa.alpha_c; });
    k["vpa.steps"] = num<long>([](C& c) -> long& { return c.vpa.step_count; });
    k["vpa.batch_size"] = num<int>([](C& c) -> int& { return c.vpa.batch_size; });
    k["vpa.tau"] = num<double>([](C& c) -> double& { return c.vpa.tau; });
    k["vpa.next_samples"] = num<int>([](C& c) -> int& { return c.vpa.next_samples; });
    k["vpa.q_lr"] = num<double>([](C& c) -> double& { return c.vpa.q_lr; });
    k["vpa.qc_lr"] = num<double>([](C& c) -> double& { return c.vpa.qc_lr; });

    k["sac.alpha"] = num<double>([](C& c) -> double& { return c.sac.alpha; });
    k["sac.batch_size"] = num<int>([](C& c) -> int& { return c.sac.batch_size; });
    k["sac.tau"] = num<double>([](C& c) -> double& { return c.sac.tau; });
    k["sac.policy_lr"] = num<double>([](C& c) -> double& { return c.sac.policy_lr; });
    k["sac.q_lr"] = num<double>([](C& c) -> double& { return c.sac.q_lr; });
    k["sac.qc_lr"] = num<double>([](C& c) -> double& { return c.sac.qc_lr; });
    k["sac.episodes_per_update"] = num<int>([](C& c) -> int& { return c.sac.episodes_per_update; });
    k["sac.rounds"] = num<long>([](C& c) -> long& { return c.sac.total_steps; });
    k["sac.updates_per_round"] = num<int>([](C& c) -> int& { return c.sac.updates_per_round; });
    k["sac.buffer_capacity"] = num<std::size_t>([](C& c) -> std::size_t& { return c.sac.buffer_capacity; });
    k["sac.next_samples"] = num<int>([](C& c) -> int& { return c.sac.next_samples; });
    k["sac.eval_episodes"] = num<int>([](C& c) -> int& { return c.sac.eval_episodes; });
    k["sac.eval_every"] = num<long>([](C& c) -> long& { return c.sac.eval_every; });
    k["sac.init"] = {[](const C& c) { return online::to_string(c.sac.init); },
                     [](C& c, const std::string& v) { c.sac.init = online::init_mode_from_string(v); }};

    k["ctl.kind"] = {[](const C& c) { return lagrange::to_string(c.ctl.kind); },
                     [](C& c, const std::string& v) { c.ctl.kind = lagrange::controller_from_string(v); }};
    k["ctl.dual_lr"] = num<double>([](C& c) -> double& { return c.ctl.dual_lr; });
    k["ctl.kp"] = num<double>([](C& c) -> double& { return c.ctl.gains.kp; });
    k["ctl.ki"] = num<double>([](C& c) -> double& { return c.ctl.gains.ki; });
    k["ctl.kd"] = num<double>([](C& c) -> double& { return c.ctl.gains.kd; });
    k["ctl.alpha"] = num<double>([](C& c) -> double& { return c.ctl.alpha; });
    k["ctl.beta"] = num<double>([](C& c) -> double& { return c.ctl.beta; });
    k["ctl.gamma"] = num<double>([](C& c) -> double& { return c.ctl.gamma; });
    k["ctl.window"] = num<std::size_t>([](C& c) -> std::size_t& { return c.ctl.window; });

    k["eval.probes"] = num<int>([](C& c) -> int& { return c.eval.probes; });
    k["eval.rollouts"] = num<int>([](C& c) -> int& { return c.eval.rollouts; });
    k["eval.episodes"] = num<int>([](C& c) -> int& { return c.eval.episodes; });

    k["run.seeds"] = {[](const C& c) { return show_list(c.seeds); },
                      [](C& c, const std::string& v) { c.seeds = parse_list<std::uint64_t>(v); }};
    k["run.out"] = {[](const C& c) { return c.out_dir; }, [](C& c, const std::string& v) { c.out_dir = v; }};
    k["run.jobs"] = num<int>([](C& c) -> int& { return c.jobs; });
    k["run.checkpoint_every"] = num<long>([](C& c) -> long& { return c.checkpoint_every; });
    return k;
  }();
  return keys;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig cfg;
  const auto& keys = registry();
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (seen.count(key))
      throw ConfigError(where + ": key '" + key + "' repeats line " + std::to_string(seen[key]));
    seen[key] = line_no;
    try {
      it->second.set(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(where + ": " + key + ": " + e.what());
    }
  }
  if (cfg.env_name.empty()) throw ConfigError(source + ": missing required key 'env.name'");
  cfg.resolve();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path);
  return parse_config(in, path);
}

std::string to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [name, key] : registry()) out += name + " = " + key.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const auto& kv : registry()) names.push_back(kv.first);
  return names;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_text(cfg))));
  return buf;
}

}  // namespace o2o::cli
