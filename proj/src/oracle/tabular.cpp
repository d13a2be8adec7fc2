#include "o2o/oracle/tabular.hpp"

#include <cmath>

namespace o2o::oracle {

void TabularCmdp::validate(double tol) const {
  const int rows = num_states * num_actions;
  if (num_states <= 0 || num_actions <= 0) throw BoundsError("tabular cmdp: empty state or action set");
  if (transitions.rows() != rows || transitions.cols() != num_states)
    throw BoundsError("tabular cmdp: transition tensor has wrong shape");
  if (reward.rows() != num_states || reward.cols() != num_actions || cost.rows() != num_states ||
      cost.cols() != num_actions)
    throw BoundsError("tabular cmdp: reward/cost tables have wrong shape");
  if (initial.size() != num_states) throw BoundsError("tabular cmdp: initial distribution has wrong size");
  if (gamma < 0.0 || gamma > 1.0) throw BoundsError("tabular cmdp: discount outside [0,1]");
  for (int r = 0; r < rows; ++r) {
    if ((transitions.row(r).array() < 0.0).any() || std::abs(transitions.row(r).sum() - 1.0) > tol)
      throw BoundsError("tabular cmdp: transition row " + std::to_string(r) + " is not a distribution");
  }
  if (std::abs(initial.sum() - 1.0) > tol) throw BoundsError("tabular cmdp: initial distribution does not sum to 1");
}

TabularPolicy deterministic_policy(const std::vector<int>& actions, int num_actions) {
  TabularPolicy pi = Mat::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  return pi;
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Mat matrix_from_json(const nlohmann::json& j, const char* key) {
  if (!j.is_array() || j.empty()) throw ParseError(std::string("tabular json: '") + key + "' must be a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (j.at(r).size() != static_cast<std::size_t>(cols))
      throw ParseError(std::string("tabular json: ragged rows in '") + key + "'");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const TabularCmdp& cmdp) {
  nlohmann::json j;
  j["num_states"] = cmdp.num_states;
  j["num_actions"] = cmdp.num_actions;
  j["gamma"] = cmdp.gamma;
  j["cost_threshold"] = cmdp.cost_threshold;
  // P nested as [s][a][s'].
  auto p = nlohmann::json::array();
  for (int s = 0; s < cmdp.num_states; ++s) {
    auto per_action = nlohmann::json::array();
    for (int a = 0; a < cmdp.num_actions; ++a) {
      auto row = nlohmann::json::array();
      for (int t = 0; t < cmdp.num_states; ++t) row.push_back(cmdp.transitions(cmdp.row(s, a), t));
      per_action.push_back(std::move(row));
    }
    p.push_back(std::move(per_action));
  }
  j["P"] = std::move(p);
  j["R"] = matrix_to_json(cmdp.reward);
  j["C"] = matrix_to_json(cmdp.cost);
  auto eta = nlohmann::json::array();
  for (Eigen::Index s = 0; s < cmdp.initial.size(); ++s) eta.push_back(cmdp.initial(s));
  j["eta"] = std::move(eta);
  return j;
}

TabularCmdp tabular_from_json(const nlohmann::json& j) {
  try {
    TabularCmdp m;
    m.num_states = j.at("num_states").get<int>();
    m.num_actions = j.at("num_actions").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.cost_threshold = j.at("cost_threshold").get<double>();
    const auto& p = j.at("P");
    if (p.size() != static_cast<std::size_t>(m.num_states)) throw ParseError("tabular json: P has wrong state count");
    m.transitions = Mat::Zero(m.num_states * m.num_actions, m.num_states);
    for (int s = 0; s < m.num_states; ++s) {
      if (p.at(s).size() != static_cast<std::size_t>(m.num_actions))
        throw ParseError("tabular json: P has wrong action count");
      for (int a = 0; a < m.num_actions; ++a) {
        const auto& row = p.at(s).at(a);
        if (row.size() != static_cast<std::size_t>(m.num_states)) throw ParseError("tabular json: P row has wrong size");
        for (int t = 0; t < m.num_states; ++t) m.transitions(m.row(s, a), t) = row.at(t).get<double>();
      }
    }
    m.reward = matrix_from_json(j.at("R"), "R");
    m.cost = matrix_from_json(j.at("C"), "C");
    const auto& eta = j.at("eta");
    m.initial = Vec(static_cast<Eigen::Index>(eta.size()));
    for (std::size_t s = 0; s < eta.size(); ++s) m.initial(static_cast<Eigen::Index>(s)) = eta.at(s).get<double>();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tabular json: ") + e.what());
  }
}

}  // namespace o2o::oracle
