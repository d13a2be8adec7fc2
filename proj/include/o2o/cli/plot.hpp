#pragma once

#include "o2o/online/sac_lag.hpp"

#include <string>
#include <vector>

namespace o2o::cli {

/// Per-step mean with the min/max range across seeds.
struct Band {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

enum class Metric { EvalReturn, EvalCost, Lambda, CumCost, MaxReturn };

double metric_value(const online::MetricsRow& row, Metric m);

/// Aggregates one metric over runs. Every run must log the same steps
/// (ParseError otherwise).
Band aggregate(const std::vector<std::vector<online::MetricsRow>>& runs, Metric m);

/// 800 x 500 canvas, plot area [70, 770] x [30, 440]. A data point (x, y)
/// maps to px = 70 + 700 (x - x0) / (x1 - x0), py = 440 - 410 (y - y0) / (y1 - y0)
/// where [x0, x1] x [y0, y1] is the data range padded by 5% vertically.
struct Canvas {
  static constexpr double kWidth = 800, kHeight = 500;
  static constexpr double kLeft = 70, kRight = 770, kTop = 30, kBottom = 440;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const;
  double py(double y) const;
};

/// Learning curve: shaded min/max band, mean line, and a dashed horizontal
/// line at `threshold` when given.
std::string learning_curve_svg(const Band& band, const std::string& title, const std::string& y_label,
                               const double* threshold = nullptr);

/// One polyline per run of (cumulative environment cost, max return so far).
std::string cost_vs_reward_svg(const std::vector<std::vector<online::MetricsRow>>& runs,
                               const std::vector<std::string>& labels);

}  // namespace o2o::cli
