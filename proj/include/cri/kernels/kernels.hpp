#pragma once

// Data-parallel inner loops. Each kernel has a plain serial reference in
// `serial` and an OpenMP version in `omp`. Elementwise outputs match the
// reference bit for bit. Reductions in the OpenMP versions go through fixed
// per-row partial buffers summed in row order, so they match the reference to
// rounding and do not depend on the thread count.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cri/image.hpp"

namespace cri::kernels {

// One rendered Gaussian blob. Positions are in [0, 1] image coordinates.
struct Blob {
  double cx = 0.5;
  double cy = 0.5;
  double sigma = 0.1;
  std::array<double, 3> color{};
  double amp = 0.0;
};

// Gradient slots per blob: cx, cy, sigma, r, g, b, amp.
inline constexpr int kBlobGradSize = 7;

struct RenderGrad {
  std::vector<double> blobs;  // kBlobGradSize per blob
  std::array<double, 3> bias{};
};

// C x H x W planar feature tensor.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
};

namespace serial {

// out(y, x, ch) = logistic(bias[ch] + sum_l amp_l * color_l[ch] * exp(-r^2 / (2 sigma_l^2)))
void render(std::span<const Blob> blobs, const std::array<double, 3>& bias, Image& out);

// `rendered` is the forward output; `grad_out` is dLoss/dImage.
void render_backward(std::span<const Blob> blobs, const Image& rendered, const Image& grad_out,
                     RenderGrad& grad);

// 3x3 convolution, zero padding, stride 1. weight is [out][in][3][3].
void conv3x3(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
             FeatureMap& out);

// Gradient of conv3x3 with respect to its input.
void conv3x3_backward_input(const FeatureMap& grad_out, std::span<const double> weight,
                            FeatureMap& grad_in);

// Nearest-center assignment. points is n x dim, centers is k x dim.
void assign_nearest(std::span<const double> points, int dim, std::span<const double> centers,
                    std::span<int> labels, std::span<double> dist2);

}  // namespace serial

namespace omp {

void render(std::span<const Blob> blobs, const std::array<double, 3>& bias, Image& out);
void render_backward(std::span<const Blob> blobs, const Image& rendered, const Image& grad_out,
                     RenderGrad& grad);
void conv3x3(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
             FeatureMap& out);
void conv3x3_backward_input(const FeatureMap& grad_out, std::span<const double> weight,
                            FeatureMap& grad_in);
void assign_nearest(std::span<const double> points, int dim, std::span<const double> centers,
                    std::span<int> labels, std::span<double> dist2);

}  // namespace omp

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace cri::kernels
