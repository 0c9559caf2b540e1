#pragma once

#include <optional>
#include <string>

#include "cri/image.hpp"

namespace cri {

enum class DegradationKind { Identity, Mask, Grayscale, Downsample };

// Box averages each s x s block; Nearest takes the pixel at offset (s/2, s/2) in the block.
enum class DownsampleKernel { Box, Nearest };

// Declarative description of a linear degradation operator D.
struct DegradationSpec {
  DegradationKind kind = DegradationKind::Identity;
  std::optional<Mask> mask;
  std::optional<int> scale;
  DownsampleKernel kernel = DownsampleKernel::Box;

  static DegradationSpec identity() { return {}; }
  static DegradationSpec grayscale() { return {DegradationKind::Grayscale, {}, {}, {}}; }
  static DegradationSpec downsample(int scale, DownsampleKernel kernel = DownsampleKernel::Box) {
    return {DegradationKind::Downsample, {}, scale, kernel};
  }
  static DegradationSpec masked(Mask mask) {
    return {DegradationKind::Mask, std::move(mask), {}, {}};
  }

  // Throws InvalidSpecError unless the spec is well formed for an h x w input.
  void validate(int height, int width) const;
  int output_height(int height) const;
  int output_width(int width) const;

  bool operator==(const DegradationSpec&) const = default;
};

// Rec. 601 luma weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// Mask that hides a centered rectangle covering `fraction` of the area.
Mask centered_box_mask(int height, int width, double fraction = 0.25);

Image apply(const DegradationSpec& spec, const Image& image);
// Transpose of D, mapping a gradient on D's output back to an h x w image.
Image apply_adjoint(const DegradationSpec& spec, const Image& grad, int height, int width);

// max |D(x + eps p) - D(x) - eps D(p)| / eps. Zero up to rounding for linear D.
double linearity_residual(const DegradationSpec& spec, const Image& image,
                          const Image& perturbation, double eps = 1e-3);

std::string to_string(DegradationKind kind);

}  // namespace cri
