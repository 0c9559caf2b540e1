#include "cri/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cri/errors.hpp"

namespace cri::harness {

namespace {

constexpr int kMarginLeft = 40;
constexpr int kMarginRight = 16;
constexpr int kMarginTop = 16;
constexpr int kMarginBottom = 32;

void put(Image& img, int x, int y, const std::array<double, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
}

void dot(Image& img, double x, double y, int radius, const std::array<double, 3>& c) {
  const int cx = static_cast<int>(std::lround(x));
  const int cy = static_cast<int>(std::lround(y));
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) put(img, cx + dx, cy + dy, c);
}

void segment(Image& img, double x0, double y0, double x1, double y1, const std::array<double, 3>& c) {
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) * 2)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    dot(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), 1, c);
  }
}

}  // namespace

Image line_plot(const std::vector<Series>& series, int width, int height) {
  if (width <= kMarginLeft + kMarginRight || height <= kMarginTop + kMarginBottom) {
    throw ShapeMismatchError("plot area too small");
  }
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeMismatchError("series x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.08 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  Image img(height, width, 1.0);
  const int x0 = kMarginLeft, x1 = width - kMarginRight;
  const int y0 = height - kMarginBottom, y1 = kMarginTop;
  auto px = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0); };
  auto py = [&](double y) { return y0 - (y - ymin) / (ymax - ymin) * (y0 - y1); };

  const std::array<double, 3> grid{0.9, 0.9, 0.9};
  const std::array<double, 3> axis{0.2, 0.2, 0.2};
  for (int i = 0; i <= 4; ++i) {
    const int y = static_cast<int>(std::lround(y0 - i * (y0 - y1) / 4.0));
    for (int x = x0; x <= x1; ++x) put(img, x, y, grid);
  }
  for (int x = x0; x <= x1; ++x) put(img, x, y0, axis);
  for (int y = y1; y <= y0; ++y) put(img, x0, y, axis);

  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      // x tick under every point
      for (int d = 1; d <= 4; ++d) put(img, static_cast<int>(std::lround(px(s.x[i]))), y0 + d, axis);
      if (i + 1 < s.x.size()) segment(img, px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), s.color);
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) dot(img, px(s.x[i]), py(s.y[i]), 3, s.color);
  }
  return img;
}

}  // namespace cri::harness
