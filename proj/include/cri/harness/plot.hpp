#pragma once

#include <array>
#include <vector>

#include "cri/image.hpp"

namespace cri::harness {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::array<double, 3> color{0.12, 0.35, 0.75};
};

// Axes, horizontal grid lines, a 2 px polyline per series and square point
// markers. The plot carries no text; numbers live in the accompanying CSV.
Image line_plot(const std::vector<Series>& series, int width = 480, int height = 320);

}  // namespace cri::harness
