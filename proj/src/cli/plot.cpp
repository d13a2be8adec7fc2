#include "o2o/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace o2o::cli {

double metric_value(const online::MetricsRow& row, Metric m) {
  switch (m) {
    case Metric::EvalReturn:
      return row.eval_return;
    case Metric::EvalCost:
      return row.eval_cost;
    case Metric::Lambda:
      return row.lambda;
    case Metric::CumCost:
      return row.cum_env_cost;
    case Metric::MaxReturn:
      return row.max_return_so_far;
  }
  return 0.0;
}

Band aggregate(const std::vector<std::vector<online::MetricsRow>>& runs, Metric m) {
  if (runs.empty() || runs.front().empty()) throw ParseError("plot: no metrics rows");
  Band b;
  const auto& first = runs.front();
  for (std::size_t i = 0; i < first.size(); ++i) {
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (runs[r].size() != first.size() || runs[r][i].step != first[i].step)
        throw ParseError("plot: run " + std::to_string(r) + " logs different steps than run 0");
      const double v = metric_value(runs[r][i], m);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    b.x.push_back(static_cast<double>(first[i].step));
    b.mean.push_back(sum / static_cast<double>(runs.size()));
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  return b;
}

double Canvas::px(double x) const { return kLeft + (kRight - kLeft) * (x - x0) / (x1 - x0); }
double Canvas::py(double y) const { return kBottom - (kBottom - kTop) * (y - y0) / (y1 - y0); }

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else if (c == '&')
      out += "&amp;";
    else
      out += c;
  }
  return out;
}

Canvas fit(double x0, double x1, double y0, double y1) {
  Canvas c;
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  c.x0 = x0;
  c.x1 = x1;
  c.y0 = y0 - pad;
  c.y1 = y1 + pad;
  return c;
}

std::string frame(const Canvas& c, const std::string& title, const std::string& x_label, const std::string& y_label) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  s += "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  s += "<rect x=\"70\" y=\"30\" width=\"700\" height=\"410\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"420\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<text x=\"420\" y=\"485\" text-anchor=\"middle\" font-size=\"12\">" + escape(x_label) + "</text>\n";
  s += "<text x=\"15\" y=\"235\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 235)\">" +
       escape(y_label) + "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = c.x0 + (c.x1 - c.x0) * i / 4.0, yv = c.y0 + (c.y1 - c.y0) * i / 4.0;
    s += "<text x=\"" + num(c.px(xv)) + "\" y=\"455\" text-anchor=\"middle\" font-size=\"10\">" + format_double(std::round(xv * 100) / 100) + "</text>\n";
    s += "<text x=\"65\" y=\"" + num(c.py(yv) + 3) + "\" text-anchor=\"end\" font-size=\"10\">" + format_double(std::round(yv * 100) / 100) + "</text>\n";
  }
  return s;
}

std::string polyline(const Canvas& c, const std::vector<double>& x, const std::vector<double>& y,
                     const std::string& attrs) {
  std::string s = "<polyline fill=\"none\" " + attrs + " points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? " " : "") + num(c.px(x[i])) + "," + num(c.py(y[i]));
  return s + "\"/>\n";
}

}  // namespace

std::string learning_curve_svg(const Band& band, const std::string& title, const std::string& y_label,
                               const double* threshold) {
  double y0 = *std::min_element(band.lo.begin(), band.lo.end());
  double y1 = *std::max_element(band.hi.begin(), band.hi.end());
  if (threshold) {
    y0 = std::min(y0, *threshold);
    y1 = std::max(y1, *threshold);
  }
  const Canvas c = fit(band.x.front(), band.x.back(), y0, y1);
  std::string s = frame(c, title, "update step", y_label);
  s += "<polygon data-role=\"band\" fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < band.x.size(); ++i) s += (i ? " " : "") + num(c.px(band.x[i])) + "," + num(c.py(band.hi[i]));
  for (std::size_t i = band.x.size(); i-- > 0;) s += " " + num(c.px(band.x[i])) + "," + num(c.py(band.lo[i]));
  s += "\"/>\n";
  s += polyline(c, band.x, band.mean, "data-role=\"mean\" stroke=\"steelblue\" stroke-width=\"2\"");
  if (threshold) {
    const std::string y = num(c.py(*threshold));
    s += "<line data-role=\"threshold\" data-value=\"" + format_double(*threshold) + "\" x1=\"70\" x2=\"770\" y1=\"" + y +
         "\" y2=\"" + y + "\" stroke=\"firebrick\" stroke-dasharray=\"6,4\"/>\n";
  }
  return s + "</svg>\n";
}

std::string cost_vs_reward_svg(const std::vector<std::vector<online::MetricsRow>>& runs,
                               const std::vector<std::string>& labels) {
  if (runs.empty()) throw ParseError("plot: no metrics rows");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& run : runs)
    for (const auto& r : run) {
      x0 = std::min(x0, r.cum_env_cost);
      x1 = std::max(x1, r.cum_env_cost);
      y0 = std::min(y0, r.max_return_so_far);
      y1 = std::max(y1, r.max_return_so_far);
    }
  const Canvas c = fit(x0, x1, y0, y1);
  std::string s = frame(c, "cumulative cost vs. maximum return", "cumulative environment cost", "max eval return so far");
  static const char* colors[] = {"steelblue", "darkorange", "seagreen", "firebrick", "purple", "saddlebrown"};
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<online::MetricsRow> rows = runs[r];
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
    std::vector<double> x, y;
    for (const auto& row : rows) {
      x.push_back(row.cum_env_cost);
      y.push_back(row.max_return_so_far);
    }
    const std::string label = r < labels.size() ? labels[r] : "run " + std::to_string(r);
    s += polyline(c, x, y,
                  "data-role=\"run\" data-label=\"" + escape(label) + "\" stroke=\"" + colors[r % 6] +
                      "\" stroke-width=\"2\"");
    s += "<text x=\"" + num(680) + "\" y=\"" + num(50 + 14.0 * r) + "\" font-size=\"11\" fill=\"" + colors[r % 6] +
         "\">" + escape(label) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace o2o::cli
