#include "o2o/offline/ood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace o2o::offline {

OodSampler::OodSampler(const OfflineDataset& data, const cmdp::ActionSpace& space, int k, double quantile,
                       std::size_t max_fit_queries, std::uint64_t seed)
    : space_(space), k_(k) {
  const std::size_t n = data.size();
  if (k < 1) throw BoundsError("ood sampler: k must be positive");
  if (n <= static_cast<std::size_t>(k)) throw BoundsError("ood sampler: dataset smaller than k+1");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw BoundsError("ood sampler: quantile must lie in (0, 1]");
  const auto obs_dim = data.transitions.front().s.size();
  ref_s_.resize(obs_dim, static_cast<Eigen::Index>(n));
  ref_a_.resize(space_.feature_dim(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    ref_s_.col(static_cast<Eigen::Index>(i)) = data.transitions[i].s;
    space_.encode(data.transitions[i].a, ref_a_.col(static_cast<Eigen::Index>(i)));
  }
  std::vector<std::size_t> queries(n);
  std::iota(queries.begin(), queries.end(), 0);
  if (n > max_fit_queries) {
    Rng rng(seed);
    std::shuffle(queries.begin(), queries.end(), rng);
    queries.resize(max_fit_queries);
  }
  std::vector<double> dists;
  dists.reserve(queries.size());
  for (std::size_t q : queries) {
    const auto i = static_cast<Eigen::Index>(q);
    dists.push_back(knn_at(view_at(ref_s_.col(i)), ref_a_.col(i), i));
  }
  std::sort(dists.begin(), dists.end());
  // Nearest-rank quantile.
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(dists.size())));
  threshold_ = dists[std::max<std::size_t>(rank, 1) - 1];
}

Vec OodSampler::features_of(const Vec& a) const {
  Vec f(space_.feature_dim());
  space_.encode(a, f);
  return f;
}

OodSampler::StateView OodSampler::view_at(const Vec& s) const {
  if (s.size() != ref_s_.rows()) throw BoundsError("ood sampler: observation has wrong size");
  StateView v;
  v.order.resize(static_cast<std::size_t>(ref_s_.cols()));
  const Vec d2 = (ref_s_.colwise() - s).colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < d2.size(); ++i) v.order[static_cast<std::size_t>(i)] = {d2(i), i};
  std::sort(v.order.begin(), v.order.end());
  return v;
}

double OodSampler::knn_at(const StateView& view, const Vec& features, Eigen::Index exclude) const {
  // Max-heap of the k smallest squared joint distances.
  std::vector<double> best;
  best.reserve(static_cast<std::size_t>(k_) + 1);
  for (const auto& [ds2, idx] : view.order) {
    if (best.size() == static_cast<std::size_t>(k_) && ds2 >= best.front()) break;
    if (idx == exclude) continue;
    const double d2 = ds2 + (ref_a_.col(idx) - features).squaredNorm();
    if (best.size() < static_cast<std::size_t>(k_)) {
      best.push_back(d2);
      std::push_heap(best.begin(), best.end());
    } else if (d2 < best.front()) {
      std::pop_heap(best.begin(), best.end());
      best.back() = d2;
      std::push_heap(best.begin(), best.end());
    }
  }
  return std::sqrt(best.front());
}

double OodSampler::knn_distance(const Vec& s, const Vec& a) const {
  return knn_at(view_at(s), features_of(a), -1);
}

OodDraw OodSampler::sample(const Vec& s, int n, Rng& rng) const {
  if (n < 0) throw BoundsError("ood sampler: negative count");
  const StateView view = view_at(s);
  OodDraw out;
  out.actions.resize(space_.dim(), n);
  if (n == 0) return out;

  if (space_.is_discrete()) {
    // Uniform proposals restricted to the OOD set are uniform over that set.
    std::vector<int> ood;
    std::vector<std::pair<double, int>> ranked;
    for (int a = 0; a < space_.count; ++a) {
      const double d = knn_at(view, features_of(Vec::Constant(1, a)), -1);
      if (d > threshold_) ood.push_back(a);
      ranked.push_back({-d, a});
    }
    if (ood.empty()) {
      out.warning = true;
      std::sort(ranked.begin(), ranked.end());
      for (int j = 0; j < n; ++j) out.actions(0, j) = ranked[static_cast<std::size_t>(j) % ranked.size()].second;
      return out;
    }
    std::uniform_int_distribution<std::size_t> pick(0, ood.size() - 1);
    for (int j = 0; j < n; ++j) out.actions(0, j) = ood[pick(rng)];
    return out;
  }

  std::vector<std::pair<double, Vec>> fallback;  // farthest candidates seen
  int found = 0, tries = 0;
  while (found < n && tries < kMaxRejections) {
    const Vec a = space_.sample_uniform(rng);
    ++tries;
    const double d = knn_at(view, features_of(a), -1);
    if (d > threshold_) {
      out.actions.col(found++) = a;
      continue;
    }
    fallback.push_back({d, a});
    std::sort(fallback.begin(), fallback.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    if (fallback.size() > static_cast<std::size_t>(n)) fallback.pop_back();
  }
  if (found < n) {
    out.warning = true;
    for (std::size_t j = 0; found < n; ++j) out.actions.col(found++) = fallback[j % fallback.size()].second;
  }
  return out;
}

OodPool build_ood_pool(const OodSampler& sampler, const OfflineDataset& data, std::size_t num_states, int per_state,
                       Rng& rng) {
  if (data.size() == 0) throw BoundsError("ood pool: empty dataset");
  const auto total = static_cast<Eigen::Index>(num_states) * per_state;
  OodPool pool;
  pool.states.resize(data.transitions.front().s.size(), total);
  pool.actions.resize(sampler.action_space().dim(), total);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::size_t warnings = 0;
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < num_states; ++i) {
    const Vec& s = data.transitions[pick(rng)].s;
    const OodDraw draw = sampler.sample(s, per_state, rng);
    warnings += draw.warning;
    for (int j = 0; j < per_state; ++j, ++col) {
      pool.states.col(col) = s;
      pool.actions.col(col) = draw.actions.col(j);
    }
  }
  pool.warning_fraction = num_states ? static_cast<double>(warnings) / static_cast<double>(num_states) : 0.0;
  return pool;
}

}  // namespace o2o::offline
