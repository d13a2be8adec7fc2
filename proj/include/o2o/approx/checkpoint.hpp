#pragma once

#include "o2o/approx/optim.hpp"
#include "o2o/approx/policy.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace o2o::approx {

/// One named flat array inside a checkpoint, with optional architecture info.
struct CheckpointEntry {
  std::string name;
  std::vector<int> layer_sizes;
  std::string activation;
  std::string head;
  Vec data;
};

/// Format: a single-line JSON header, a newline, then every entry's data as
/// raw little-endian IEEE-754 doubles in header order. Round trips are
/// bit-exact.
struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  nlohmann::json meta = nlohmann::json::object();

  const CheckpointEntry& get(const std::string& name) const;
  bool has(const std::string& name) const;
  void put(CheckpointEntry entry);
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Raises MissingArtifactError when the file does not exist.
Checkpoint load_checkpoint(const std::string& path);

/// Serializes an RNG engine state to text and back.
std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

/// Policy, critics for both channels and their targets, plus optimizer state.
struct AgentNets {
  StochasticPolicy policy;
  DifferentiableNet q;
  DifferentiableNet qc;
  Vec q_target;
  Vec qc_target;
  Adam policy_opt;
  Adam q_opt;
  Adam qc_opt;

  /// Critic input is [observation; action features]; targets start equal to
  /// the online critics.
  static AgentNets create(int obs_dim, const cmdp::ActionSpace& space, const std::vector<int>& hidden, Rng& rng,
                          double policy_lr, double q_lr, double qc_lr);

  DifferentiableNet q_target_net() const { return DifferentiableNet(q.arch, q_target); }
  DifferentiableNet qc_target_net() const { return DifferentiableNet(qc.arch, qc_target); }
  /// Resets optimizer moments (e.g. when a new training phase starts).
  void reset_optimizers(double policy_lr, double q_lr, double qc_lr);

  void store(Checkpoint& ckpt) const;
  static AgentNets restore(const Checkpoint& ckpt, const cmdp::ActionSpace& space);
};

}  // namespace o2o::approx
