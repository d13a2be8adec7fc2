#pragma once

#include "o2o/core.hpp"

#include <deque>
#include <ostream>
#include <string>
#include <vector>

namespace o2o::lagrange {

/// Mean episode cost of the current round minus the threshold.
double error_signal(const std::vector<double>& episode_costs, double cost_threshold);

struct DualAscentCtl {
  double lr = 1e-4;
};

/// lambda' = max(0, lambda + lr * e)
double dual_ascent_update(double lambda, const DualAscentCtl& ctl, double e);

struct PidGains {
  double kp = 1e-4;
  double ki = 1e-5;
  double kd = 1e-5;
};

/// Discrete PID on the multiplier, dt = 1 tick.
struct PidCtl {
  PidGains gains;
  double integral = 0.0;
  double prev_error = 0.0;
  double dt = 1.0;
};

/// integral += e dt; d = (e - e_prev)/dt;
/// lambda' = max(0, lambda + kp e + ki integral + kd d); e_prev = e.
double pid_update(double lambda, PidCtl& ctl, double e);

struct WindowStats {
  double mean = 0.0;
  double std = 0.0;  // n-1 denominator, 0 for a single entry
};

WindowStats window_stats(const std::deque<double>& window);

struct APidCtl {
  PidCtl pid;
  PidGains lower{1e-5, 1e-6, 1e-6};
  PidGains upper{1e-3, 1e-4, 1e-4};
  double alpha = 0.05;
  double beta = 0.05;
  double gamma = 0.05;
  std::size_t window_size = 10;
  std::deque<double> window;
  double eps = 1e-6;

  /// Bounds at [0.1x, 10x] of the given initial gains.
  static APidCtl with_gains(const PidGains& initial, double alpha = 0.05, double beta = 0.05, double gamma = 0.05);
  void push_cost(double episode_cost);
};

/// Adapts kp, ki, kd from the window statistics and clips them to bounds.
void apid_adapt_gains(APidCtl& ctl, const std::deque<double>& window, double cost_threshold);

enum class ControllerKind { Dual, Pid, APid };
std::string to_string(ControllerKind k);
ControllerKind controller_from_string(const std::string& name);

/// One controller tick as logged to the trace.
struct TraceRow {
  long tick = 0;
  double lambda = 0.0;
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double err = 0.0;
  double window_mean = 0.0;
  double window_std = 0.0;
};

/// Uniform front end over the three update laws. Each tick consumes the
/// undiscounted costs of the round's episodes.
class Controller {
 public:
  Controller() = default;
  static Controller dual(double lr, double lambda0 = 0.0);
  static Controller pid(const PidGains& gains, double lambda0 = 0.0);
  static Controller apid(const APidCtl& ctl, double lambda0 = 0.0);

  ControllerKind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  const APidCtl& state() const { return apid_; }
  const DualAscentCtl& dual_state() const { return dual_; }
  long ticks() const { return ticks_; }

  /// Updates lambda (then, for aPID, the gains) and returns the trace row.
  TraceRow tick(const std::vector<double>& episode_costs, double cost_threshold);

 private:
  ControllerKind kind_ = ControllerKind::Dual;
  double lambda_ = 0.0;
  DualAscentCtl dual_;
  // The PID law and the cost window live here for every kind; only aPID
  // adapts the gains.
  APidCtl apid_;
  long ticks_ = 0;
};

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRow& row);

/// Synthetic plant: episode cost = c0 / (1 + lambda) + N(0, noise_std^2).
struct CostPlant {
  double c0 = 60.0;
  double noise_std = 3.0;
};

struct PlantRun {
  std::vector<TraceRow> trace;
  std::vector<double> tick_costs;  // mean episode cost of each tick
};

PlantRun simulate_plant(Controller controller, const CostPlant& plant, long ticks, int episodes_per_tick,
                        double cost_threshold, std::uint64_t seed);

/// First tick whose trailing `window` mean lies within +-band*c_th, or -1.
long settling_tick(const std::vector<double>& tick_costs, double cost_threshold, std::size_t window = 10,
                   double band = 0.1);

/// Sample std of tick costs from `from` (inclusive) on; 0 if fewer than two.
double post_settling_std(const std::vector<double>& tick_costs, long from);

}  // namespace o2o::lagrange
