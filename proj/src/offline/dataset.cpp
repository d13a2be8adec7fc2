#include "o2o/offline/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace o2o::offline {
namespace {

using nlohmann::json;

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

double OfflineDataset::zero_cost_fraction() const {
  if (transitions.empty()) return 0.0;
  std::size_t zero = 0;
  for (const auto& t : transitions) zero += t.c == 0.0;
  return static_cast<double>(zero) / static_cast<double>(transitions.size());
}

OfflineDataset generate_dataset(const cmdp::Environment& env, const std::vector<BehaviorComponent>& mix,
                                std::size_t size, std::uint64_t seed) {
  if (size == 0) throw BoundsError("generate_dataset: size must be at least 1");
  if (mix.empty()) throw BoundsError("generate_dataset: empty behavior mix");
  double total = 0.0;
  for (const auto& m : mix) {
    if (m.policy == nullptr || m.weight < 0.0) throw BoundsError("generate_dataset: bad behavior component");
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw BoundsError("generate_dataset: behavior weights must sum to 1");

  OfflineDataset data;
  data.transitions.reserve(size);
  auto sim = env.clone();
  std::uint64_t episode = 0;
  std::size_t assigned = 0;
  std::string description;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const std::size_t quota = k + 1 == mix.size()
                                  ? size - assigned
                                  : std::min(size - assigned, static_cast<std::size_t>(std::llround(mix[k].weight * size)));
    assigned += quota;
    std::size_t got = 0;
    while (got < quota) {
      const auto traj = cmdp::rollout(*mix[k].policy, *sim, derive_seed(seed, episode++));
      for (const auto& t : traj.transitions) {
        if (got == quota) break;
        data.transitions.push_back(t);
        ++got;
      }
    }
    if (!description.empty()) description += '+';
    description += format_double(mix[k].weight) + '*' + (mix[k].name.empty() ? "policy" : mix[k].name);
  }
  data.meta.env_name = env.spec().name;
  data.meta.behavior = description;
  data.meta.size = data.transitions.size();
  data.meta.zero_cost_fraction = data.zero_cost_fraction();
  data.meta.seed = seed;
  return data;
}

void write_dataset(std::ostream& out, const OfflineDataset& data) {
  json meta = {{"env", data.meta.env_name},
               {"behavior", data.meta.behavior},
               {"size", data.transitions.size()},
               {"zero_cost_fraction", data.zero_cost_fraction()},
               {"seed", data.meta.seed}};
  out << json{{"meta", meta}}.dump() << '\n';
  for (const auto& t : data.transitions) {
    json j = {{"s", vec_json(t.s)}, {"a", vec_json(t.a)}, {"r", t.r},
              {"c", t.c},           {"s2", vec_json(t.s_next)}, {"done", t.done}};
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::string& path, const OfflineDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_dataset(out, data);
  if (!out) throw Error("write to '" + path + "' failed");
}

OfflineDataset read_dataset(std::istream& in) {
  OfflineDataset data;
  std::string line;
  long line_no = 0;
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("dataset line " + std::to_string(line_no) + ": " + why + " (last valid line " +
                      std::to_string(line_no - 1) + ")");
  };
  if (!std::getline(in, line)) throw ParseError("dataset: empty file");
  ++line_no;
  try {
    const json h = json::parse(line).at("meta");
    data.meta.env_name = h.at("env").get<std::string>();
    data.meta.behavior = h.at("behavior").get<std::string>();
    data.meta.size = h.at("size").get<std::size_t>();
    data.meta.zero_cost_fraction = h.at("zero_cost_fraction").get<double>();
    data.meta.seed = h.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      cmdp::Transition t;
      t.s = json_vec(j.at("s"));
      t.a = json_vec(j.at("a"));
      t.r = j.at("r").get<double>();
      t.c = j.at("c").get<double>();
      t.s_next = json_vec(j.at("s2"));
      t.done = j.at("done").get<bool>();
      data.transitions.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  if (data.transitions.size() != data.meta.size) {
    ++line_no;
    throw fail("expected " + std::to_string(data.meta.size) + " transitions, found " +
               std::to_string(data.transitions.size()));
  }
  return data;
}

OfflineDataset load_dataset(const std::string& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("dataset '" + path + "' not found");
  std::ifstream in(path, std::ios::binary);
  return read_dataset(in);
}

}  // namespace o2o::offline
