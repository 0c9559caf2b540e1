#include <cmath>
#include <limits>

#include "cri/kernels/kernels.hpp"

namespace cri::kernels::serial {

void render(std::span<const Blob> blobs, const std::array<double, 3>& bias, Image& out) {
  const int H = out.height;
  const int W = out.width;
  for (int y = 0; y < H; ++y) {
    const double py = (y + 0.5) / H;
    for (int x = 0; x < W; ++x) {
      const double px = (x + 0.5) / W;
      double s[3] = {bias[0], bias[1], bias[2]};
      for (const Blob& b : blobs) {
        const double dx = px - b.cx;
        const double dy = py - b.cy;
        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
        for (int c = 0; c < 3; ++c) s[c] += b.amp * b.color[c] * g;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = logistic(s[c]);
    }
  }
}

void render_backward(std::span<const Blob> blobs, const Image& rendered, const Image& grad_out,
                     RenderGrad& grad) {
  const int H = rendered.height;
  const int W = rendered.width;
  grad.blobs.assign(blobs.size() * kBlobGradSize, 0.0);
  grad.bias = {0.0, 0.0, 0.0};
  for (int y = 0; y < H; ++y) {
    const double py = (y + 0.5) / H;
    for (int x = 0; x < W; ++x) {
      const double px = (x + 0.5) / W;
      double ds[3];
      for (int c = 0; c < 3; ++c) {
        const double o = rendered.at(y, x, c);
        ds[c] = grad_out.at(y, x, c) * o * (1.0 - o);
        grad.bias[c] += ds[c];
      }
      for (std::size_t i = 0; i < blobs.size(); ++i) {
        const Blob& b = blobs[i];
        double* gb = grad.blobs.data() + i * kBlobGradSize;
        const double dx = px - b.cx;
        const double dy = py - b.cy;
        const double r2 = dx * dx + dy * dy;
        const double s2 = b.sigma * b.sigma;
        const double g = std::exp(-r2 / (2.0 * s2));
        double dg = 0.0;
        double damp = 0.0;
        for (int c = 0; c < 3; ++c) {
          dg += ds[c] * b.amp * b.color[c];
          gb[3 + c] += ds[c] * b.amp * g;
          damp += ds[c] * b.color[c] * g;
        }
        gb[6] += damp;
        gb[0] += dg * g * dx / s2;
        gb[1] += dg * g * dy / s2;
        gb[2] += dg * g * r2 / (s2 * b.sigma);
      }
    }
  }
}

void conv3x3(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
             FeatureMap& out) {
  const int cin = in.channels;
  const int H = in.height;
  const int W = in.width;
  for (int co = 0; co < out.channels; ++co) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
          const double* wk = weight.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = y + ky - 1;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x + kx - 1;
              if (ix < 0 || ix >= W) continue;
              acc += wk[ky * 3 + kx] * in.at(ci, iy, ix);
            }
          }
        }
        out.at(co, y, x) = acc;
      }
    }
  }
}

void conv3x3_backward_input(const FeatureMap& grad_out, std::span<const double> weight,
                            FeatureMap& grad_in) {
  const int cin = grad_in.channels;
  const int cout = grad_out.channels;
  const int H = grad_out.height;
  const int W = grad_out.width;
  for (int ci = 0; ci < cin; ++ci) {
    for (int iy = 0; iy < H; ++iy) {
      for (int ix = 0; ix < W; ++ix) {
        double acc = 0.0;
        for (int co = 0; co < cout; ++co) {
          const double* wk = weight.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int y = iy - ky + 1;
            if (y < 0 || y >= H) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int x = ix - kx + 1;
              if (x < 0 || x >= W) continue;
              acc += wk[ky * 3 + kx] * grad_out.at(co, y, x);
            }
          }
        }
        grad_in.at(ci, iy, ix) = acc;
      }
    }
  }
}

void assign_nearest(std::span<const double> points, int dim, std::span<const double> centers,
                    std::span<int> labels, std::span<double> dist2) {
  const std::size_t n = labels.size();
  const std::size_t k = centers.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = points.data() + i * dim;
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double* c = centers.data() + j * dim;
      double d = 0.0;
      for (int t = 0; t < dim; ++t) {
        const double diff = p[t] - c[t];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    labels[i] = best_j;
    dist2[i] = best;
  }
}

}  // namespace cri::kernels::serial
