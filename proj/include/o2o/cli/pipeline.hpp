#pragma once

#include "o2o/cli/config.hpp"

#include <nlohmann/json.hpp>

#include <exception>
#include <functional>
#include <string>
#include <vector>

namespace o2o::cli {

std::string code_version();

struct StageRecord {
  std::string name;
  std::string status;  // "running" | "done"
  std::string started;
  std::string finished;
  std::vector<std::string> artifacts;  // file names relative to the run directory
};

/// One per seed directory; written before and finalized after every stage.
struct RunManifest {
  std::string config_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& stage) const;
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

RunManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const RunManifest& m);

/// File layout of one seed: <out>/seed_<n>/{config.txt, manifest.json, ...}.
struct RunPaths {
  std::string dir;
  std::string file(const std::string& name) const { return dir + "/" + name; }
};
RunPaths run_paths(const ExperimentConfig& cfg, std::uint64_t seed);

inline const char* kDataFile = "data.jsonl";
inline const char* kPretrainCkpt = "pretrain.ckpt";
inline const char* kPretrainCsv = "pretrain_metrics.csv";
inline const char* kVpaCkpt = "vpa.ckpt";
inline const char* kVpaCsv = "vpa_metrics.csv";
inline const char* kFinetuneCkpt = "finetune.ckpt";
inline const char* kMetricsCsv = "metrics.csv";
inline const char* kTraceCsv = "trace.csv";

struct StageOptions {
  /// Skip a stage whose manifest entry is done and whose artifacts all exist.
  bool resume = false;
  /// Log line sink; nullptr silences progress output.
  std::function<void(const std::string&)> log;
};

/// Scripted-plus-random behavior mixture parsed from cfg.data_behavior.
offline::OfflineDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

void cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts = {});
void cmd_pretrain(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts = {});
/// Writes vpa.ckpt; with vpa.enabled = false the pretrained checkpoint is
/// copied through unchanged.
void cmd_vpa(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts = {});
/// Warm start reads vpa.ckpt; from_scratch builds fresh networks.
void cmd_finetune(const ExperimentConfig& cfg, std::uint64_t seed, const StageOptions& opts = {});

/// Evaluates the latest checkpoint of the seed (or `stage` when given) and
/// writes eval_episodes.csv, and when pretrain and VPA checkpoints exist,
/// alignment.csv / alignment.txt, plus oracle_gap.csv on tabular envs.
void cmd_eval(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& stage = "",
              const StageOptions& opts = {});

/// Learning curves for return and cost (threshold line at `cost_threshold`)
/// and the cumulative-cost vs. max-return figure, written into `out_dir`.
std::vector<std::string> cmd_plot(const std::vector<std::string>& metrics_files, const std::string& out_dir,
                                  double cost_threshold);

/// Tabular export, constrained optimum and its multiplier as JSON.
nlohmann::json oracle_report(const ExperimentConfig& cfg);
void cmd_oracle(const ExperimentConfig& cfg, const std::string& path);

/// Runs fn(seed) for every configured seed with up to cfg.jobs workers;
/// rethrows the first failure.
void for_each_seed(const ExperimentConfig& cfg, const std::function<void(std::uint64_t)>& fn);

/// 2 config/unsupported, 3 missing artifact, 4 divergence, 1 anything else.
int exit_code(const std::exception& e);

}  // namespace o2o::cli
