#include "o2o/approx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace o2o::approx {
namespace {

static_assert(sizeof(double) == 8, "checkpoints assume 64-bit doubles");

void write_le(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double read_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (in.gcount() != 8) throw ParseError("checkpoint: truncated data section");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

CheckpointEntry net_entry(const std::string& name, const Mlp& arch, const Vec& data, const std::string& head = "") {
  return {name, arch.layer_sizes(), to_string(arch.hidden_activation()), head, data};
}

Mlp arch_of(const CheckpointEntry& e) { return Mlp(e.layer_sizes, activation_from_string(e.activation)); }

void store_adam(Checkpoint& ckpt, const std::string& name, const Adam& opt) {
  ckpt.put({name + ".m", {}, "", "", opt.m});
  ckpt.put({name + ".v", {}, "", "", opt.v});
  ckpt.meta[name] = {{"lr", opt.lr}, {"step", opt.step_count}};
}

Adam restore_adam(const Checkpoint& ckpt, const std::string& name, Eigen::Index size) {
  Adam opt(size, 1e-3);
  if (!ckpt.has(name + ".m")) return opt;
  opt.m = ckpt.get(name + ".m").data;
  opt.v = ckpt.get(name + ".v").data;
  opt.lr = ckpt.meta.at(name).at("lr").get<double>();
  opt.step_count = ckpt.meta.at(name).at("step").get<long>();
  if (opt.m.size() != size || opt.v.size() != size) throw ParseError("checkpoint: optimizer state size mismatch");
  return opt;
}

}  // namespace

const CheckpointEntry& Checkpoint::get(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw MissingArtifactError("checkpoint has no entry '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return true;
  return false;
}

void Checkpoint::put(CheckpointEntry entry) {
  for (auto& e : entries)
    if (e.name == entry.name) {
      e = std::move(entry);
      return;
    }
  entries.push_back(std::move(entry));
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = "o2o-checkpoint-1";
  header["meta"] = ckpt.meta;
  nlohmann::json list = nlohmann::json::array();
  long offset = 0;
  for (const auto& e : ckpt.entries) {
    list.push_back({{"name", e.name},
                    {"layer_sizes", e.layer_sizes},
                    {"activation", e.activation},
                    {"head", e.head},
                    {"offset", offset},
                    {"count", e.data.size()}});
    offset += e.data.size();
  }
  header["entries"] = list;
  out << header.dump() << '\n';
  for (const auto& e : ckpt.entries)
    for (Eigen::Index i = 0; i < e.data.size(); ++i) write_le(out, e.data(i));
  if (!out) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format", "") != "o2o-checkpoint-1") throw ParseError("checkpoint: unknown format");
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& j : header.at("entries")) {
    CheckpointEntry e;
    e.name = j.at("name").get<std::string>();
    e.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    e.activation = j.at("activation").get<std::string>();
    e.head = j.at("head").get<std::string>();
    e.data.resize(j.at("count").get<long>());
    for (Eigen::Index i = 0; i < e.data.size(); ++i) e.data(i) = read_le(in);
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("checkpoint '" + path + "' not found");
  std::ifstream in(path, std::ios::binary);
  return read_checkpoint(in);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_state(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ParseError("bad rng state");
  return rng;
}

AgentNets AgentNets::create(int obs_dim, const cmdp::ActionSpace& space, const std::vector<int>& hidden, Rng& rng,
                            double policy_lr, double q_lr, double qc_lr) {
  AgentNets a;
  a.policy = StochasticPolicy::create(obs_dim, space, hidden, rng);
  std::vector<int> critic{obs_dim + space.feature_dim()};
  critic.insert(critic.end(), hidden.begin(), hidden.end());
  critic.push_back(1);
  a.q = DifferentiableNet::random(critic, rng);
  a.qc = DifferentiableNet::random(critic, rng);
  a.q_target = a.q.params;
  a.qc_target = a.qc.params;
  a.reset_optimizers(policy_lr, q_lr, qc_lr);
  return a;
}

void AgentNets::reset_optimizers(double policy_lr, double q_lr, double qc_lr) {
  policy_opt = Adam(policy.params().size(), policy_lr);
  q_opt = Adam(q.params.size(), q_lr);
  qc_opt = Adam(qc.params.size(), qc_lr);
}

void AgentNets::store(Checkpoint& ckpt) const {
  ckpt.put(net_entry("policy", policy.net(), policy.params(), to_string(policy.head())));
  ckpt.put(net_entry("q", q.arch, q.params));
  ckpt.put(net_entry("qc", qc.arch, qc.params));
  ckpt.put(net_entry("q_target", q.arch, q_target));
  ckpt.put(net_entry("qc_target", qc.arch, qc_target));
  store_adam(ckpt, "policy_opt", policy_opt);
  store_adam(ckpt, "q_opt", q_opt);
  store_adam(ckpt, "qc_opt", qc_opt);
}

AgentNets AgentNets::restore(const Checkpoint& ckpt, const cmdp::ActionSpace& space) {
  AgentNets a;
  const auto& p = ckpt.get("policy");
  if (head_from_string(p.head) != (space.is_discrete() ? HeadKind::Softmax : HeadKind::SquashedGaussian))
    throw ParseError("checkpoint policy head does not match the action space");
  a.policy = StochasticPolicy(space, arch_of(p), p.data);
  a.q = DifferentiableNet(arch_of(ckpt.get("q")), ckpt.get("q").data);
  a.qc = DifferentiableNet(arch_of(ckpt.get("qc")), ckpt.get("qc").data);
  a.q_target = ckpt.get("q_target").data;
  a.qc_target = ckpt.get("qc_target").data;
  if (a.q_target.size() != a.q.params.size() || a.qc_target.size() != a.qc.params.size())
    throw ParseError("checkpoint target size mismatch");
  a.policy_opt = restore_adam(ckpt, "policy_opt", a.policy.params().size());
  a.q_opt = restore_adam(ckpt, "q_opt", a.q.params.size());
  a.qc_opt = restore_adam(ckpt, "qc_opt", a.qc.params.size());
  return a;
}

}  // namespace o2o::approx
