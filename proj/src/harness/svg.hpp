#pragma once

// Minimal deterministic SVG charts. Coordinates are printed with two
// decimals so the output is stable text.

#include <string>
#include <utility>
#include <vector>

namespace specfair::svg {

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
};

std::string bar_chart(const Axes& axes, const std::vector<std::pair<std::string, double>>& bars);
std::string line_chart(const Axes& axes, const std::vector<std::pair<double, double>>& points);
/// Labelled points; an optional dashed y = x reference line.
std::string scatter(const Axes& axes, const std::vector<std::pair<double, double>>& points,
                    const std::vector<std::string>& labels, bool diagonal);

}  // namespace specfair::svg
