// Command-line driver: offline pretraining, value pre-alignment and online
// finetuning stages over a key = value experiment config.
#include "o2o/cli/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace o2o;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out;
  bool resume = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "experiment config (key = value lines)")->required();
  sub->add_option("--seed", c.seeds, "seed(s) to run, overriding run.seeds");
  sub->add_option("--out", c.out, "output directory, overriding run.out");
  sub->add_flag("--resume", c.resume, "skip stages already completed for this config");
}

cli::ExperimentConfig resolve(const Common& c) {
  cli::ExperimentConfig cfg = cli::load_config(c.config_path);
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

cli::StageOptions options(const Common& c) {
  cli::StageOptions o;
  o.resume = c.resume;
  o.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained offline-to-online RL pipeline"};
  app.require_subcommand(1);
  Common common;
  std::string eval_stage;
  std::vector<std::string> plot_inputs;
  std::string oracle_out;

  auto* gen = app.add_subcommand("gen-data", "collect the offline dataset");
  auto* pre = app.add_subcommand("pretrain", "offline CPQ pretraining");
  auto* vpa = app.add_subcommand("vpa", "value pre-alignment of the pretrained critics");
  auto* fin = app.add_subcommand("finetune", "online SAC-lag finetuning with the configured controller");
  auto* all = app.add_subcommand("run", "gen-data, pretrain, vpa and finetune in sequence");
  auto* ev = app.add_subcommand("eval", "evaluate checkpoints and write alignment reports");
  auto* plot = app.add_subcommand("plot", "SVG learning curves from metrics CSVs");
  auto* orc = app.add_subcommand("oracle", "exact constrained solution of a tabular environment");
  for (auto* sub : {gen, pre, vpa, fin, all, ev, plot, orc}) add_common(sub, common);
  ev->add_option("--stage", eval_stage, "checkpoint to evaluate: pretrain, vpa or finetune (default: latest)");
  plot->add_option("files", plot_inputs, "metrics CSVs (default: every seed's metrics.csv)");
  orc->add_option("--file", oracle_out, "output JSON (default: <out>/oracle.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const cli::ExperimentConfig cfg = resolve(common);
    const cli::StageOptions opts = options(common);
    auto stages = [&](auto... fns) {
      cli::for_each_seed(cfg, [&](std::uint64_t seed) { (fns(cfg, seed, opts), ...); });
    };
    if (gen->parsed()) stages(cli::cmd_gen_data);
    if (pre->parsed()) stages(cli::cmd_pretrain);
    if (vpa->parsed()) stages(cli::cmd_vpa);
    if (fin->parsed()) stages(cli::cmd_finetune);
    if (all->parsed()) {
      const bool scratch = cfg.sac.init == online::InitMode::FromScratch;
      if (scratch)
        stages(cli::cmd_finetune);
      else
        stages(cli::cmd_gen_data, cli::cmd_pretrain, cli::cmd_vpa, cli::cmd_finetune);
    }
    if (ev->parsed())
      cli::for_each_seed(cfg, [&](std::uint64_t seed) { cli::cmd_eval(cfg, seed, eval_stage, opts); });
    if (plot->parsed()) {
      std::vector<std::string> files = plot_inputs;
      if (files.empty())
        for (std::uint64_t s : cfg.seeds) files.push_back(cli::run_paths(cfg, s).file(cli::kMetricsCsv));
      for (const auto& name : cli::cmd_plot(files, cfg.out_dir + "/plots", cfg.spec().cost_threshold))
        std::cerr << "wrote " << cfg.out_dir << "/plots/" << name << '\n';
    }
    if (orc->parsed()) {
      const std::string path = oracle_out.empty() ? cfg.out_dir + "/oracle.json" : oracle_out;
      cli::cmd_oracle(cfg, path);
      std::cerr << "wrote " << path << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code(e);
  }
  return 0;
}
