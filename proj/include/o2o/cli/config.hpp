#pragma once

#include "o2o/cmdp/grid_circle.hpp"
#include "o2o/cmdp/point_circle.hpp"
#include "o2o/lagrange/controllers.hpp"
#include "o2o/offline/cpq.hpp"
#include "o2o/online/sac_lag.hpp"
#include "o2o/vpa/vpa.hpp"

#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace o2o::cli {

struct ControllerConfig {
  lagrange::ControllerKind kind = lagrange::ControllerKind::APid;
  double dual_lr = 1e-4;
  lagrange::PidGains gains;
  double alpha = 0.05;
  double beta = 0.05;
  double gamma = 0.05;
  std::size_t window = 10;

  lagrange::Controller make() const;
};

struct EvalConfig {
  int probes = 64;
  int rollouts = 10;
  int episodes = 5;
};

/// Fully resolved experiment configuration. Every stage discounts with the
/// environment's gamma.
struct ExperimentConfig {
  std::string env_name;  // "grid_circle" or "point_circle"; required
  cmdp::GridCircleWorld::Params grid;
  cmdp::PointCircle::Params point;

  std::size_t data_size = 20000;
  /// Comma-separated name:weight pairs over {expert, random}; expert is the
  /// environment's scripted safe policy.
  std::string data_behavior = "expert:0.5,random:0.5";

  offline::CpqConfig cpq;
  /// Indicator threshold; unset means the discounted per-episode budget.
  std::optional<double> cpq_l;
  vpa::VpaConfig vpa;
  online::SacLagConfig sac;
  ControllerConfig ctl;
  EvalConfig eval;

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string out_dir = "runs";
  int jobs = 1;
  long checkpoint_every = 0;  // finetune rounds between checkpoints, 0 = off
  bool use_vpa = true;

  std::unique_ptr<cmdp::Environment> make_env() const;
  cmdp::EnvSpec spec() const;
  /// Copies gamma and derived thresholds into the stage configs and
  /// validates everything.
  void resolve();
};

/// `key = value` lines, `#` comments. Unknown keys, malformed lines and bad
/// values raise ConfigError naming the key or line; env.name is required.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Every key with its resolved value, sorted by key.
std::string to_text(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

std::uint64_t fnv1a(const std::string& bytes);
/// 16 hex digits of fnv1a(to_text(cfg)).
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace o2o::cli
