#pragma once

#include "o2o/offline/dataset.hpp"

namespace o2o::offline {

struct OodDraw {
  Mat actions;           // one action per column
  bool warning = false;  // set when rejection sampling gave up
};

/// Labels (s, a) as out-of-distribution when its distance to the k-th
/// nearest dataset pair in the joint [s; action features] space exceeds the
/// q-quantile of the same statistic measured within the dataset.
class OodSampler {
 public:
  static constexpr int kMaxRejections = 10000;

  OodSampler() = default;
  /// The within-dataset quantile is estimated on at most `max_fit_queries`
  /// reference pairs (chosen with `seed`), each excluding itself.
  OodSampler(const OfflineDataset& data, const cmdp::ActionSpace& space, int k = 5, double quantile = 0.95,
             std::size_t max_fit_queries = 2000, std::uint64_t seed = 0);

  double threshold() const { return threshold_; }
  int k() const { return k_; }
  const cmdp::ActionSpace& action_space() const { return space_; }

  double knn_distance(const Vec& s, const Vec& a) const;
  bool is_ood(const Vec& s, const Vec& a) const { return knn_distance(s, a) > threshold_; }

  /// n actions drawn uniformly from the action space conditioned on being OOD
  /// at s. After kMaxRejections failed candidates the farthest candidates seen
  /// are returned instead and `warning` is set.
  OodDraw sample(const Vec& s, int n, Rng& rng) const;

 private:
  // Exact k-NN at a fixed state: references are scanned in order of state
  // distance and the scan stops once no later reference can be closer.
  struct StateView {
    std::vector<std::pair<double, Eigen::Index>> order;  // (squared state distance, ref index)
  };
  StateView view_at(const Vec& s) const;
  double knn_at(const StateView& view, const Vec& features, Eigen::Index exclude) const;
  Vec features_of(const Vec& a) const;

  cmdp::ActionSpace space_;
  Mat ref_s_;
  Mat ref_a_;
  int k_ = 5;
  double threshold_ = 0.0;
};

/// Precomputed (state, OOD action) pairs for the CPQ penalty term.
struct OodPool {
  Mat states;
  Mat actions;
  double warning_fraction = 0.0;

  Eigen::Index size() const { return states.cols(); }
};

/// Draws `num_states` dataset states (with replacement) and `per_state` OOD
/// actions for each.
OodPool build_ood_pool(const OodSampler& sampler, const OfflineDataset& data, std::size_t num_states,
                       int per_state, Rng& rng);

}  // namespace o2o::offline
