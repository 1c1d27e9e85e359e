#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace specfair::svg {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr int kTicks = 5;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  static Range of(std::vector<double> values, bool include_zero) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return !std::isfinite(v); }),
                 values.end());
    Range r;
    if (values.empty()) return r;
    r.lo = *std::min_element(values.begin(), values.end());
    r.hi = *std::max_element(values.begin(), values.end());
    if (include_zero) {
      r.lo = std::min(r.lo, 0.0);
      r.hi = std::max(r.hi, 0.0);
    }
    if (r.hi - r.lo < 1e-12) {
      r.lo -= 0.5;
      r.hi += 0.5;
    } else {
      const double pad = 0.05 * (r.hi - r.lo);
      if (!(include_zero && r.lo == 0.0)) r.lo -= pad;
      r.hi += pad;
    }
    return r;
  }
};

class Canvas {
 public:
  Canvas(const Axes& axes, Range x, Range y) : x_(x), y_(y) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
         << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\">\n";
    out_ << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
         << "\" fill=\"white\"/>\n";
    text(kWidth / 2, kTop / 2 + 5, axes.title, "middle", 16);
    text(kLeft + plot_w() / 2, kHeight - 15, axes.x_label, "middle", 12);
    out_ << "<text x=\"18\" y=\"" << num(kTop + plot_h() / 2)
         << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
         << num(kTop + plot_h() / 2) << ")\">" << escape(axes.y_label) << "</text>\n";
    line(kLeft, kTop + plot_h(), kLeft + plot_w(), kTop + plot_h(), "black", false);
    line(kLeft, kTop, kLeft, kTop + plot_h(), "black", false);
    for (int i = 0; i <= kTicks; ++i) {
      const double v = y_.lo + (y_.hi - y_.lo) * i / kTicks;
      line(kLeft - 4, py(v), kLeft, py(v), "black", false);
      text(kLeft - 8, py(v) + 4, tick_label(v), "end", 10);
    }
  }

  double plot_w() const { return kWidth - kLeft - kRight; }
  double plot_h() const { return kHeight - kTop - kBottom; }
  double px(double v) const { return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * plot_w(); }
  double py(double v) const { return kTop + plot_h() - (v - y_.lo) / (y_.hi - y_.lo) * plot_h(); }

  void x_ticks() {
    for (int i = 0; i <= kTicks; ++i) {
      const double v = x_.lo + (x_.hi - x_.lo) * i / kTicks;
      line(px(v), kTop + plot_h(), px(v), kTop + plot_h() + 4, "black", false);
      text(px(v), kTop + plot_h() + 18, tick_label(v), "middle", 10);
    }
  }

  void line(double x1, double y1, double x2, double y2, const char* stroke, bool dashed) {
    out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
         << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << '"'
         << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
  }

  void text(double x, double y, const std::string& body, const char* anchor, int size) {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor
         << "\" font-size=\"" << size << "\">" << escape(body) << "</text>\n";
  }

  void rect(double x, double y, double w, double h) {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
         << "\" height=\"" << num(h) << "\" fill=\"steelblue\"/>\n";
  }

  void circle(double x, double y) {
    out_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y)
         << "\" r=\"4\" fill=\"darkorange\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& points) {
    out_ << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0) out_ << ' ';
      out_ << num(px(points[i].first)) << ',' << num(py(points[i].second));
    }
    out_ << "\"/>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  Range x_;
  Range y_;
  std::ostringstream out_;
};

}  // namespace

std::string bar_chart(const Axes& axes, const std::vector<std::pair<std::string, double>>& bars) {
  std::vector<double> ys;
  for (const auto& b : bars) ys.push_back(b.second);
  const double n = static_cast<double>(std::max<std::size_t>(bars.size(), 1));
  Canvas c(axes, Range{0.0, n}, Range::of(ys, true));
  const double slot = c.plot_w() / n;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double v = std::isfinite(bars[i].second) ? bars[i].second : 0.0;
    const double top = std::min(c.py(v), c.py(0.0));
    const double height = std::abs(c.py(0.0) - c.py(v));
    const double x = kLeft + slot * static_cast<double>(i) + 0.15 * slot;
    c.rect(x, top, 0.7 * slot, height);
    c.text(x + 0.35 * slot, kTop + c.plot_h() + 18, bars[i].first, "middle", 10);
  }
  return c.finish();
}

std::string line_chart(const Axes& axes, const std::vector<std::pair<double, double>>& points) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [x, y] : points) {
    xs.push_back(x);
    ys.push_back(y);
  }
  Canvas c(axes, Range::of(xs, false), Range::of(ys, true));
  c.x_ticks();
  c.polyline(points);
  return c.finish();
}

std::string scatter(const Axes& axes, const std::vector<std::pair<double, double>>& points,
                    const std::vector<std::string>& labels, bool diagonal) {
  std::vector<double> both;
  for (const auto& [x, y] : points) {
    both.push_back(x);
    both.push_back(y);
  }
  // Shared range so the y = x reference is the true diagonal.
  const Range r = Range::of(both, false);
  Canvas c(axes, r, r);
  c.x_ticks();
  if (diagonal) c.line(c.px(r.lo), c.py(r.lo), c.px(r.hi), c.py(r.hi), "gray", true);
  for (std::size_t i = 0; i < points.size(); ++i) {
    c.circle(c.px(points[i].first), c.py(points[i].second));
    if (i < labels.size()) {
      c.text(c.px(points[i].first) + 6, c.py(points[i].second) - 6, labels[i], "start", 10);
    }
  }
  return c.finish();
}

}  // namespace specfair::svg
