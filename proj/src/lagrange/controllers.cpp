#include "o2o/lagrange/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace o2o::lagrange {

double error_signal(const std::vector<double>& episode_costs, double cost_threshold) {
  if (episode_costs.empty()) throw BoundsError("error_signal: no episode costs");
  double sum = 0.0;
  for (double c : episode_costs) sum += c;
  return sum / static_cast<double>(episode_costs.size()) - cost_threshold;
}

double dual_ascent_update(double lambda, const DualAscentCtl& ctl, double e) {
  return std::max(0.0, lambda + ctl.lr * e);
}

double pid_update(double lambda, PidCtl& ctl, double e) {
  ctl.integral += e * ctl.dt;
  const double derivative = (e - ctl.prev_error) / ctl.dt;
  ctl.prev_error = e;
  const auto& g = ctl.gains;
  return std::max(0.0, lambda + g.kp * e + g.ki * ctl.integral + g.kd * derivative);
}

WindowStats window_stats(const std::deque<double>& window) {
  if (window.empty()) throw BoundsError("window_stats: empty window");
  const double n = static_cast<double>(window.size());
  WindowStats s;
  for (double c : window) s.mean += c;
  s.mean /= n;
  if (window.size() > 1) {
    double ss = 0.0;
    for (double c : window) ss += (c - s.mean) * (c - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

APidCtl APidCtl::with_gains(const PidGains& initial, double alpha, double beta, double gamma) {
  APidCtl c;
  c.pid.gains = initial;
  c.lower = {0.1 * initial.kp, 0.1 * initial.ki, 0.1 * initial.kd};
  c.upper = {10.0 * initial.kp, 10.0 * initial.ki, 10.0 * initial.kd};
  c.alpha = alpha;
  c.beta = beta;
  c.gamma = gamma;
  return c;
}

void APidCtl::push_cost(double episode_cost) {
  window.push_back(episode_cost);
  while (window.size() > window_size) window.pop_front();
}

void apid_adapt_gains(APidCtl& ctl, const std::deque<double>& window, double cost_threshold) {
  const WindowStats st = window_stats(window);
  const double denom = std::max(st.mean, ctl.eps);
  const double rel = (st.mean - cost_threshold) / denom;
  auto& g = ctl.pid.gains;
  g.kp = std::clamp(g.kp * (1.0 + ctl.alpha * std::tanh(rel)), ctl.lower.kp, ctl.upper.kp);
  g.ki = std::clamp(g.ki * (1.0 + ctl.beta * rel), ctl.lower.ki, ctl.upper.ki);
  g.kd = std::clamp(g.kd * (1.0 + ctl.gamma * st.std / denom), ctl.lower.kd, ctl.upper.kd);
}

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Dual: return "dual";
    case ControllerKind::Pid: return "pid";
    case ControllerKind::APid: return "apid";
  }
  return "dual";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "dual") return ControllerKind::Dual;
  if (name == "pid") return ControllerKind::Pid;
  if (name == "apid") return ControllerKind::APid;
  throw ConfigError("unknown controller '" + name + "' (expected dual, pid or apid)");
}

Controller Controller::dual(double lr, double lambda0) {
  Controller c;
  c.kind_ = ControllerKind::Dual;
  c.dual_.lr = lr;
  c.lambda_ = lambda0;
  return c;
}

Controller Controller::pid(const PidGains& gains, double lambda0) {
  Controller c;
  c.kind_ = ControllerKind::Pid;
  c.apid_ = APidCtl::with_gains(gains);
  c.lambda_ = lambda0;
  return c;
}

Controller Controller::apid(const APidCtl& ctl, double lambda0) {
  Controller c;
  c.kind_ = ControllerKind::APid;
  c.apid_ = ctl;
  c.lambda_ = lambda0;
  return c;
}

TraceRow Controller::tick(const std::vector<double>& episode_costs, double cost_threshold) {
  const double e = error_signal(episode_costs, cost_threshold);
  for (double c : episode_costs) apid_.push_cost(c);
  switch (kind_) {
    case ControllerKind::Dual: lambda_ = dual_ascent_update(lambda_, dual_, e); break;
    case ControllerKind::Pid: lambda_ = pid_update(lambda_, apid_.pid, e); break;
    case ControllerKind::APid:
      lambda_ = pid_update(lambda_, apid_.pid, e);
      apid_adapt_gains(apid_, apid_.window, cost_threshold);
      break;
  }
  const WindowStats st = window_stats(apid_.window);
  TraceRow row;
  row.tick = ++ticks_;
  row.lambda = lambda_;
  if (kind_ != ControllerKind::Dual) {
    row.kp = apid_.pid.gains.kp;
    row.ki = apid_.pid.gains.ki;
    row.kd = apid_.pid.gains.kd;
  }
  row.err = e;
  row.window_mean = st.mean;
  row.window_std = st.std;
  return row;
}

void write_trace_header(std::ostream& out) { out << "tick,lambda,kp,ki,kd,err,window_mean,window_std\n"; }

void write_trace_row(std::ostream& out, const TraceRow& r) {
  out << r.tick << ',' << format_double(r.lambda) << ',' << format_double(r.kp) << ',' << format_double(r.ki) << ','
      << format_double(r.kd) << ',' << format_double(r.err) << ',' << format_double(r.window_mean) << ','
      << format_double(r.window_std) << '\n';
}

PlantRun simulate_plant(Controller controller, const CostPlant& plant, long ticks, int episodes_per_tick,
                        double cost_threshold, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, plant.noise_std);
  PlantRun run;
  std::vector<double> costs(static_cast<std::size_t>(episodes_per_tick));
  for (long t = 0; t < ticks; ++t) {
    double sum = 0.0;
    for (auto& c : costs) {
      c = plant.c0 / (1.0 + controller.lambda()) + noise(rng);
      sum += c;
    }
    run.tick_costs.push_back(sum / static_cast<double>(costs.size()));
    run.trace.push_back(controller.tick(costs, cost_threshold));
  }
  return run;
}

long settling_tick(const std::vector<double>& tick_costs, double cost_threshold, std::size_t window, double band) {
  double sum = 0.0;
  for (std::size_t t = 0; t < tick_costs.size(); ++t) {
    sum += tick_costs[t];
    if (t >= window) sum -= tick_costs[t - window];
    const double n = static_cast<double>(std::min(t + 1, window));
    if (t + 1 >= window && std::abs(sum / n - cost_threshold) <= band * cost_threshold) return static_cast<long>(t);
  }
  return -1;
}

double post_settling_std(const std::vector<double>& tick_costs, long from) {
  if (from < 0 || static_cast<std::size_t>(from) + 2 > tick_costs.size()) return 0.0;
  std::deque<double> tail(tick_costs.begin() + from, tick_costs.end());
  return window_stats(tail).std;
}

}  // namespace o2o::lagrange
