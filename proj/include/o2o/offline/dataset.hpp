#pragma once

#include "o2o/cmdp/env.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace o2o::offline {

struct DatasetMeta {
  std::string env_name;
  std::string behavior;
  std::size_t size = 0;
  double zero_cost_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct OfflineDataset {
  std::vector<cmdp::Transition> transitions;
  DatasetMeta meta;

  std::size_t size() const { return transitions.size(); }
  /// Recomputed from the transitions.
  double zero_cost_fraction() const;
};

struct BehaviorComponent {
  const cmdp::Policy* policy = nullptr;
  double weight = 0.0;
  std::string name;
};

/// Each component contributes round(weight * size) transitions (the last
/// component absorbs rounding), collected from whole episodes in order and
/// truncated at the quota. Episode i of the whole run uses derive_seed(seed, i).
OfflineDataset generate_dataset(const cmdp::Environment& env, const std::vector<BehaviorComponent>& mix,
                                std::size_t size, std::uint64_t seed);

/// JSON lines: a header {"meta": {...}} followed by one object per transition
/// with keys s, a, r, c, s2, done.
void save_dataset(const std::string& path, const OfflineDataset& data);
void write_dataset(std::ostream& out, const OfflineDataset& data);
/// ParseError messages name the offending line and the last valid one.
OfflineDataset read_dataset(std::istream& in);
OfflineDataset load_dataset(const std::string& path);

}  // namespace o2o::offline
