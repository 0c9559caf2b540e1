#include "cri/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "cri/errors.hpp"

namespace cri {

void DegradationSpec::validate(int height, int width) const {
  if (height <= 0 || width <= 0) throw InvalidSpecError("image has no pixels");
  if (mask.has_value() != (kind == DegradationKind::Mask)) {
    throw InvalidSpecError("a mask is required for, and only for, mask degradation");
  }
  if (scale.has_value() != (kind == DegradationKind::Downsample)) {
    throw InvalidSpecError("a scale is required for, and only for, downsample degradation");
  }
  if (kind == DegradationKind::Mask) {
    if (mask->height != height || mask->width != width) {
      throw InvalidSpecError("mask is " + std::to_string(mask->height) + "x" +
                             std::to_string(mask->width) + " but image is " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
  }
  if (kind == DegradationKind::Downsample) {
    if (*scale <= 0) throw InvalidSpecError("scale must be positive");
    if (height % *scale != 0 || width % *scale != 0) {
      throw InvalidSpecError("scale " + std::to_string(*scale) + " does not divide image size");
    }
  }
}

int DegradationSpec::output_height(int height) const {
  return kind == DegradationKind::Downsample ? height / *scale : height;
}

int DegradationSpec::output_width(int width) const {
  return kind == DegradationKind::Downsample ? width / *scale : width;
}

Mask centered_box_mask(int height, int width, double fraction) {
  Mask m{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1)};
  const double side = std::sqrt(std::clamp(fraction, 0.0, 1.0));
  const int bh = static_cast<int>(std::lround(height * side));
  const int bw = static_cast<int>(std::lround(width * side));
  const int y0 = (height - bh) / 2;
  const int x0 = (width - bw) / 2;
  for (int y = y0; y < y0 + bh; ++y) {
    for (int x = x0; x < x0 + bw; ++x) m.bits[static_cast<std::size_t>(y) * width + x] = 0;
  }
  return m;
}

Image apply(const DegradationSpec& spec, const Image& image) {
  spec.validate(image.height, image.width);
  switch (spec.kind) {
    case DegradationKind::Identity:
      return image;
    case DegradationKind::Mask: {
      Image out = image;
      for (std::size_t p = 0; p < image.pixels(); ++p) {
        if (!spec.mask->bits[p]) {
          for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = 0.0;
        }
      }
      return out;
    }
    case DegradationKind::Grayscale: {
      Image out(image.height, image.width);
      for (std::size_t p = 0; p < image.pixels(); ++p) {
        const double* px = image.data.data() + p * 3;
        // Same weights, arranged so a gray pixel maps to itself exactly.
        const double y = px[1] + kLumaR * (px[0] - px[1]) + kLumaB * (px[2] - px[1]);
        for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = y;
      }
      return out;
    }
    case DegradationKind::Downsample: {
      const int s = *spec.scale;
      Image out(image.height / s, image.width / s);
      if (spec.kernel == DownsampleKernel::Nearest) {
        for (int y = 0; y < out.height; ++y) {
          for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y * s + s / 2, x * s + s / 2, c);
          }
        }
        return out;
      }
      const double inv = 1.0 / (s * s);
      for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
          for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int dy = 0; dy < s; ++dy) {
              for (int dx = 0; dx < s; ++dx) acc += image.at(y * s + dy, x * s + dx, c);
            }
            out.at(y, x, c) = acc * inv;
          }
        }
      }
      return out;
    }
  }
  throw InvalidSpecError("unknown degradation kind");
}

Image apply_adjoint(const DegradationSpec& spec, const Image& grad, int height, int width) {
  spec.validate(height, width);
  if (grad.height != spec.output_height(height) || grad.width != spec.output_width(width)) {
    throw ShapeMismatchError("gradient does not match degraded shape");
  }
  switch (spec.kind) {
    case DegradationKind::Identity:
    case DegradationKind::Mask:
      // Both are self-adjoint.
      return apply(spec, grad);
    case DegradationKind::Grayscale: {
      Image out(height, width);
      for (std::size_t p = 0; p < out.pixels(); ++p) {
        const double* g = grad.data.data() + p * 3;
        const double s = g[0] + g[1] + g[2];
        out.data[p * 3 + 0] = kLumaR * s;
        out.data[p * 3 + 1] = (1.0 - kLumaR - kLumaB) * s;
        out.data[p * 3 + 2] = kLumaB * s;
      }
      return out;
    }
    case DegradationKind::Downsample: {
      const int s = *spec.scale;
      Image out(height, width);
      if (spec.kernel == DownsampleKernel::Nearest) {
        for (int y = 0; y < grad.height; ++y) {
          for (int x = 0; x < grad.width; ++x) {
            for (int c = 0; c < 3; ++c) out.at(y * s + s / 2, x * s + s / 2, c) = grad.at(y, x, c);
          }
        }
        return out;
      }
      const double inv = 1.0 / (s * s);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = grad.at(y / s, x / s, c) * inv;
        }
      }
      return out;
    }
  }
  throw InvalidSpecError("unknown degradation kind");
}

double linearity_residual(const DegradationSpec& spec, const Image& image,
                          const Image& perturbation, double eps) {
  if (!image.same_shape(perturbation)) throw ShapeMismatchError("perturbation shape mismatch");
  Image shifted = image;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.data[i] += eps * perturbation.data[i];
  const Image a = apply(spec, shifted);
  const Image b = apply(spec, image);
  const Image c = apply(spec, perturbation);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data[i] - b.data[i] - eps * c.data[i]));
  }
  return worst / eps;
}

std::string to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::Identity: return "identity";
    case DegradationKind::Mask: return "mask";
    case DegradationKind::Grayscale: return "grayscale";
    case DegradationKind::Downsample: return "downsample";
  }
  return "unknown";
}

}  // namespace cri
