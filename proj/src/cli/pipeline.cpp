#include "o2o/cli/pipeline.hpp"

#include "o2o/cli/plot.hpp"
#include "o2o/oracle/solvers.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#ifndef O2O_VERSION
#define O2O_VERSION "dev"
#endif

namespace fs = std::filesystem;

namespace o2o::cli {

std::string code_version() { return O2O_VERSION; }

const StageRecord* RunManifest::find(const std::string& stage) const {
  for (const auto& s : stages)
    if (s.name == stage) return &s;
  return nullptr;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["config"] = "config.txt";
  j["code_version"] = code_version;
  j["seed"] = seed;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"name", s.name},
                           {"status", s.status},
                           {"started", s.started},
                           {"finished", s.finished},
                           {"artifacts", s.artifacts}});
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.code_version = j.at("code_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("stages"))
      m.stages.push_back({s.at("name"), s.at("status"), s.at("started"), s.at("finished"),
                          s.at("artifacts").get<std::vector<std::string>>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("manifest not found: " + path);
  try {
    return RunManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path + ": " + e.what());
  }
}

void save_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << m.to_json().dump(2) << '\n';
}

RunPaths run_paths(const ExperimentConfig& cfg, std::uint64_t seed) {
  return {cfg.out_dir + "/seed_" + std::to_string(seed)};
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing artifact: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require(const std::string& path, const std::string& producer) {
  if (!fs::exists(path)) throw MissingArtifactError("missing artifact: " + path + " (run '" + producer + "' first)");
}

// Manifest bookkeeping around one stage of one seed.
class Stage {
 public:
  Stage(const ExperimentConfig& cfg, std::uint64_t seed, std::string name, const StageOptions& opts)
      : paths_(run_paths(cfg, seed)), name_(std::move(name)), opts_(opts) {
    fs::create_directories(paths_.dir);
    const std::string hash = config_hash(cfg);
    const std::string mpath = paths_.file("manifest.json");
    if (fs::exists(mpath)) manifest_ = load_manifest(mpath);
    if (manifest_.config_hash != hash) manifest_ = RunManifest{};
    manifest_.config_hash = hash;
    manifest_.code_version = code_version();
    manifest_.seed = seed;
    if (opts.resume) {
      const StageRecord* rec = manifest_.find(name_);
      if (rec && rec->status == "done") {
        skip_ = true;
        for (const auto& a : rec->artifacts) skip_ = skip_ && fs::exists(paths_.file(a));
      }
    }
    if (skip_) {
      say("resume: " + name_ + " already done");
      return;
    }
    write_text(paths_.file("config.txt"), to_text(cfg));
    StageRecord* rec = record();
    *rec = StageRecord{name_, "running", utc_now(), "", {}};
    save_manifest(mpath, manifest_);
    say(name_ + ": started");
  }

  bool skip() const { return skip_; }
  const RunPaths& paths() const { return paths_; }

  void finish(std::vector<std::string> artifacts) {
    StageRecord* rec = record();
    rec->status = "done";
    rec->finished = utc_now();
    rec->artifacts = std::move(artifacts);
    save_manifest(paths_.file("manifest.json"), manifest_);
    say(name_ + ": done");
  }

  void say(const std::string& msg) const {
    if (opts_.log) opts_.log("[seed " + std::to_string(manifest_.seed) + "] " + msg);
  }

 private:
  StageRecord* record() {
    for (auto& s : manifest_.stages)
      if (s.name == name_) return &s;
    manifest_.stages.push_back({name_, "", "", "", {}});
    return &manifest_.stages.back();
  }

  RunPaths paths_;
  std::string name_;
  StageOptions opts_;
  RunManifest manifest_;
  bool skip_ = false;
};

approx::AgentNets load_nets(const std::string& path, const cmdp::EnvSpec& spec) {
  const approx::Checkpoint ck = approx::load_checkpoint(path);
  const std::string mismatch = "checkpoint " + path + " does not match environment '" + spec.name + "'";
  std::optional<approx::AgentNets> restored;
  try {
    restored.emplace(approx::AgentNets::restore(ck, spec.action_space));
  } catch (const ParseError& e) {
    throw ConfigError(mismatch + ": " + e.what());
  } catch (const BoundsError& e) {
    throw ConfigError(mismatch + ": " + e.what());
  }
  const approx::AgentNets& nets = *restored;
  const int critic_in = spec.obs_dim + spec.action_space.feature_dim();
  if (nets.policy.net().input_dim() != spec.obs_dim || nets.q.arch.input_dim() != critic_in ||
      nets.qc.arch.input_dim() != critic_in)
    throw ConfigError(mismatch);
  return nets;
}

void save_nets(const std::string& path, const approx::AgentNets& nets) {
  approx::Checkpoint ck;
  nets.store(ck);
  approx::save_checkpoint(path, ck);
}

}  // namespace

offline::OfflineDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto env = cfg.make_env();
  std::unique_ptr<cmdp::Policy> expert;
  if (auto* g = dynamic_cast<const cmdp::GridCircleWorld*>(env.get()))
    expert = std::make_unique<cmdp::GridRingPolicy>(*g);
  else if (auto* p = dynamic_cast<const cmdp::PointCircle*>(env.get()))
    expert = std::make_unique<cmdp::CircleTrackingPolicy>(*p);
  cmdp::UniformRandomPolicy random(env->spec().action_space);

  std::vector<offline::BehaviorComponent> mix;
  std::stringstream ss(cfg.data_behavior);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("data.behavior: expected name:weight, got '" + item + "'");
    const std::string name = item.substr(0, colon);
    double w = 0.0;
    try {
      w = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("data.behavior: bad weight in '" + item + "'");
    }
    if (name == "expert")
      mix.push_back({expert.get(), w, "expert"});
    else if (name == "random")
      mix.push_back({&random, w, "random"});
    else
      throw ConfigError("data.behavior: unknown policy '" + name + "' (expected expert or random)");
  }
  return offline::generate_dataset(*env, mix, cfg.data_size, seed);
}

void cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts) {
  Stage st(cfg, seed, "gen-data", opts);
  if (st.skip()) return;
  offline::save_dataset(st.paths().file(kDataFile), make_dataset(cfg, seed));
  st.finish({"config.txt", kDataFile});
}

void cmd_pretrain(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts) {
  const RunPaths p = run_paths(cfg, seed);
  require(p.file(kDataFile), "gen-data");
  Stage st(cfg, seed, "pretrain", opts);
  if (st.skip()) return;
  const auto data = offline::load_dataset(p.file(kDataFile));
  const offline::PretrainResult res = offline::pretrain(data, cfg.spec(), cfg.cpq, derive_seed(seed, 101));
  save_nets(p.file(kPretrainCkpt), res.nets);
  std::ostringstream csv;
  csv << "step,qc_loss,q_loss,policy_loss,gate_open_fraction\n";
  for (std::size_t i = 0; i < res.history.size(); ++i) {
    const auto& h = res.history[i];
    csv << i + 1 << ',' << format_double(h.qc_loss) << ',' << format_double(h.q_loss) << ','
        << format_double(h.policy_loss) << ',' << format_double(h.gate_open_fraction) << '\n';
  }
  write_text(p.file(kPretrainCsv), csv.str());
  st.say("ood threshold " + format_double(res.ood_threshold) + ", fallback fraction " +
         format_double(res.ood_warning_fraction));
  st.finish({"config.txt", kPretrainCkpt, kPretrainCsv});
}

void cmd_vpa(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts) {
  const RunPaths p = run_paths(cfg, seed);
  require(p.file(kPretrainCkpt), "pretrain");
  if (cfg.use_vpa) require(p.file(kDataFile), "gen-data");
  Stage st(cfg, seed, "vpa", opts);
  if (st.skip()) return;
  if (!cfg.use_vpa) {
    write_text(p.file(kVpaCkpt), read_bytes(p.file(kPretrainCkpt)));
    st.finish({"config.txt", kVpaCkpt});
    return;
  }
  approx::AgentNets nets = load_nets(p.file(kPretrainCkpt), cfg.spec());
  const auto history = vpa::vpa_run(offline::load_dataset(p.file(kDataFile)), nets, cfg.vpa, derive_seed(seed, 102));
  save_nets(p.file(kVpaCkpt), nets);
  std::ostringstream csv;
  csv << "step,q_loss,qc_loss\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    csv << i + 1 << ',' << format_double(history[i].q_loss) << ',' << format_double(history[i].qc_loss) << '\n';
  write_text(p.file(kVpaCsv), csv.str());
  st.finish({"config.txt", kVpaCkpt, kVpaCsv});
}

void cmd_finetune(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts) {
  const RunPaths p = run_paths(cfg, seed);
  const bool warm = cfg.sac.init == online::InitMode::WarmStart;
  if (warm) require(p.file(kVpaCkpt), "vpa");
  Stage st(cfg, seed, "finetune", opts);
  if (st.skip()) return;
  const auto env = cfg.make_env();
  const cmdp::EnvSpec spec = env->spec();
  approx::AgentNets init;
  if (warm) {
    init = load_nets(p.file(kVpaCkpt), spec);
  } else {
    Rng rng(derive_seed(seed, 104));
    init = approx::AgentNets::create(spec.obs_dim, spec.action_space, cfg.sac.hidden, rng, cfg.sac.policy_lr,
                                     cfg.sac.q_lr, cfg.sac.qc_lr);
  }
  std::vector<std::string> artifacts{"config.txt", kFinetuneCkpt, kMetricsCsv, kTraceCsv};
  online::RoundHook hook;
  if (cfg.checkpoint_every > 0)
    hook = [&](long round, const approx::AgentNets& nets) {
      if (round % cfg.checkpoint_every != 0) return;
      const std::string name = "finetune_round_" + std::to_string(round) + ".ckpt";
      save_nets(p.file(name), nets);
      artifacts.push_back(name);
      st.say("round " + std::to_string(round) + " checkpoint");
    };
  const online::FinetuneResult res =
      online::finetune_loop(*env, std::move(init), cfg.ctl.make(), cfg.sac, derive_seed(seed, 103), hook);
  save_nets(p.file(kFinetuneCkpt), res.nets);
  std::ostringstream metrics, trace;
  online::write_metrics_csv(metrics, res.metrics);
  write_text(p.file(kMetricsCsv), metrics.str());
  lagrange::write_trace_header(trace);
  for (const auto& row : res.trace) lagrange::write_trace_row(trace, row);
  write_text(p.file(kTraceCsv), trace.str());
  if (!res.metrics.empty()) {
    const auto& last = res.metrics.back();
    st.say("final eval return " + format_double(last.eval_return) + ", cost " + format_double(last.eval_cost) +
           ", lambda " + format_double(last.lambda));
  }
  st.finish(artifacts);
}

void cmd_eval(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& stage, const StageOptions& opts) {
  const RunPaths p = run_paths(cfg, seed);
  const std::vector<std::pair<std::string, std::string>> order{
      {"finetune", kFinetuneCkpt}, {"vpa", kVpaCkpt}, {"pretrain", kPretrainCkpt}};
  std::string chosen, ckpt;
  for (const auto& [name, file] : order) {
    if (!stage.empty() && name != stage) continue;
    if (fs::exists(p.file(file))) {
      chosen = name;
      ckpt = file;
      break;
    }
  }
  if (chosen.empty())
    throw MissingArtifactError("no checkpoint to evaluate in " + p.dir +
                               (stage.empty() ? std::string() : " for stage '" + stage + "'"));
  Stage st(cfg, seed, "eval", opts);
  if (st.skip()) return;
  const auto env = cfg.make_env();
  const cmdp::EnvSpec spec = env->spec();
  const approx::AgentNets nets = load_nets(p.file(ckpt), spec);
  std::vector<std::string> artifacts{"config.txt", "eval_episodes.csv"};

  const online::EvalResult ev = online::evaluate_policy(nets.policy, *env, cfg.eval.episodes, derive_seed(seed, 105));
  std::ostringstream episodes;
  episodes << "stage,episode,return,cost\n";
  for (std::size_t i = 0; i < ev.returns.size(); ++i)
    episodes << chosen << ',' << i << ',' << format_double(ev.returns[i]) << ',' << format_double(ev.costs[i]) << '\n';
  write_text(p.file("eval_episodes.csv"), episodes.str());
  st.say(chosen + " policy: mean return " + format_double(ev.mean_return) + ", mean cost " +
         format_double(ev.mean_cost));

  const bool have_data = fs::exists(p.file(kDataFile));
  if (have_data && fs::exists(p.file(kPretrainCkpt)) && fs::exists(p.file(kVpaCkpt))) {
    const auto data = offline::load_dataset(p.file(kDataFile));
    const approx::AgentNets before = load_nets(p.file(kPretrainCkpt), spec);
    const approx::AgentNets after = load_nets(p.file(kVpaCkpt), spec);
    std::vector<vpa::AlignmentReport> reports;
    for (vpa::ProbeMode mode : {vpa::ProbeMode::Random, vpa::ProbeMode::Dataset}) {
      const vpa::ProbeSet probes = vpa::make_probes(before.policy, *env, &data, mode, cfg.eval.probes,
                                                    cfg.eval.rollouts, derive_seed(seed, 106));
      reports.push_back(vpa::alignment_report(probes, spec.action_space, before, after));
    }
    std::ostringstream csv;
    vpa::write_alignment_csv(csv, reports, spec.name);
    write_text(p.file("alignment.csv"), csv.str());
    write_text(p.file("alignment.txt"), vpa::format_alignment_table(reports, spec.name));
    artifacts.insert(artifacts.end(), {"alignment.csv", "alignment.txt"});
  }

  if (auto* grid = dynamic_cast<const cmdp::GridCircleWorld*>(env.get()); grid && have_data) {
    const auto data = offline::load_dataset(p.file(kDataFile));
    std::ostringstream csv;
    csv << "stage,q_mae,qc_mae,q_mae_weighted,qc_mae_weighted,q_ood_signed,qc_ood_signed,qc_in_signed\n";
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (!fs::exists(p.file(it->second))) continue;
      const vpa::OracleGap g = vpa::oracle_gap(load_nets(p.file(it->second), spec), *grid, data);
      csv << it->first << ',' << format_double(g.q_mae) << ',' << format_double(g.qc_mae) << ','
          << format_double(g.q_mae_weighted) << ',' << format_double(g.qc_mae_weighted) << ','
          << format_double(g.q_ood_signed) << ',' << format_double(g.qc_ood_signed) << ','
          << format_double(g.qc_in_signed) << '\n';
    }
    write_text(p.file("oracle_gap.csv"), csv.str());
    artifacts.push_back("oracle_gap.csv");
  }
  st.finish(artifacts);
}

std::vector<std::string> cmd_plot(const std::vector<std::string>& metrics_files, const std::string& out_dir,
                                  double cost_threshold) {
  if (metrics_files.empty()) throw ConfigError("plot: need at least one metrics CSV");
  std::vector<std::vector<online::MetricsRow>> runs;
  std::vector<std::string> labels;
  for (const auto& f : metrics_files) {
    std::ifstream in(f);
    if (!in) throw MissingArtifactError("missing artifact: " + f);
    try {
      runs.push_back(online::read_metrics_csv(in));
    } catch (const ParseError& e) {
      throw ParseError(f + ": " + e.what());
    }
    labels.push_back(fs::path(f).parent_path().filename().string());
  }
  fs::create_directories(out_dir);
  const std::vector<std::string> names{"learning_return.svg", "learning_cost.svg", "cost_vs_reward.svg"};
  write_text(out_dir + "/" + names[0],
             learning_curve_svg(aggregate(runs, Metric::EvalReturn), "evaluation return", "episode return"));
  write_text(out_dir + "/" + names[1], learning_curve_svg(aggregate(runs, Metric::EvalCost), "evaluation cost",
                                                          "episode cost", &cost_threshold));
  write_text(out_dir + "/" + names[2], cost_vs_reward_svg(runs, labels));
  nlohmann::json m;
  m["inputs"] = metrics_files;
  m["artifacts"] = names;
  m["cost_threshold"] = cost_threshold;
  m["code_version"] = code_version();
  write_text(out_dir + "/plot_manifest.json", m.dump(2) + "\n");
  return names;
}

nlohmann::json oracle_report(const ExperimentConfig& cfg) {
  const auto env = cfg.make_env();
  const oracle::TabularCmdp tab = cmdp::to_tabular(*env);
  const oracle::ConstrainedOptimum opt = oracle::constrained_optimum(tab);
  nlohmann::json j;
  j["env"] = env->spec().name;
  j["tabular"] = oracle::to_json(tab);
  std::vector<std::vector<double>> policy(static_cast<std::size_t>(opt.policy.rows()));
  for (Eigen::Index s = 0; s < opt.policy.rows(); ++s)
    for (Eigen::Index a = 0; a < opt.policy.cols(); ++a) policy[static_cast<std::size_t>(s)].push_back(opt.policy(s, a));
  j["optimum"] = {{"lambda", opt.lambda},     {"reward", opt.reward},
                  {"cost", opt.cost},         {"cost_threshold", tab.cost_threshold},
                  {"mix_weight", opt.mix_weight}, {"policy", policy}};
  return j;
}

void cmd_oracle(const ExperimentConfig& cfg, const std::string& path) {
  const nlohmann::json j = oracle_report(cfg);
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_text(path, j.dump() + "\n");
}

void for_each_seed(const ExperimentConfig& cfg, const std::function<void(std::uint64_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), cfg.seeds.size());
  if (workers <= 1) {
    for (std::uint64_t s : cfg.seeds) fn(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
        try {
          fn(cfg.seeds[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnsupportedError*>(&e)) return 2;
  if (dynamic_cast<const MissingArtifactError*>(&e)) return 3;
  if (dynamic_cast<const DivergenceError*>(&e)) return 4;
  return 1;
}

}  // namespace o2o::cli
