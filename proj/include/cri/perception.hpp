#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cri/image.hpp"
#include "cri/kernels/kernels.hpp"

namespace cri {

struct ExtractorConfig {
  std::uint64_t seed = 7;
  int base_resolution = 32;
  int scales = 3;
  int channels = 16;

  bool operator==(const ExtractorConfig&) const = default;
};

// Multi-scale features of one image. `normalized` holds the activations
// rescaled to unit length along the channel axis at every position.
struct FeatureEmbedding {
  std::vector<kernels::FeatureMap> activations;
  std::vector<kernels::FeatureMap> normalized;
  std::vector<std::vector<double>> norms;  // per scale, per position

  // Per-scale, per-channel spatial mean of the normalized features.
  std::vector<double> pooled() const;
};

// Frozen pyramid of 3x3 conv + tanh stages with 2x average pooling between
// them. Weights come from a seeded stream, or from a weight file written by
// save(). Inputs smaller than the base resolution are bilinearly upsampled
// first, so degraded low-resolution images can be compared directly.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(ExtractorConfig config = {});

  // Manifest is JSON naming a flat little-endian float32 file and the shape of
  // every block in order.
  static FeatureExtractor load(const std::filesystem::path& manifest);
  void save(const std::filesystem::path& manifest) const;

  const ExtractorConfig& config() const { return config_; }
  int stage_count() const { return config_.scales; }
  std::span<const double> weight(int stage) const { return weights_[stage]; }

  Image prepare(const Image& image) const;
  FeatureEmbedding embed(const Image& image) const;

  double distance(const Image& x, const Image& y) const;
  double distance(const FeatureEmbedding& a, const FeatureEmbedding& b) const;
  // Distance between a fixed target embedding and x, plus its gradient with
  // respect to x (at x's own resolution).
  double distance_with_grad(const FeatureEmbedding& target, const Image& x, Image& grad_x) const;

 private:
  FeatureExtractor(ExtractorConfig config, std::vector<std::vector<double>> weights,
                   std::vector<std::vector<double>> biases);
  void check_input(const Image& image) const;
  FeatureEmbedding embed_prepared(const Image& image) const;

  ExtractorConfig config_;
  std::array<double, 3> input_mean_{0.5, 0.5, 0.5};
  std::array<double, 3> input_std_{0.25, 0.25, 0.25};
  std::vector<std::vector<double>> weights_;  // per stage, [out][in][3][3]
  std::vector<std::vector<double>> biases_;
};

// Bilinear (half-pixel centers) upsampling by an integer factor, and its adjoint.
Image upsample_bilinear(const Image& image, int factor);
Image upsample_bilinear_adjoint(const Image& grad, int factor);

// Mean squared pixel difference over all channels.
double pixel_l2(const Image& x, const Image& y);
// Gradient of pixel_l2 with respect to x.
Image pixel_l2_grad(const Image& x, const Image& y);

// Peak 1.0; capped at 99 dB when MSE < 1e-10.
double psnr(const Image& x, const Image& y);
double psnr_from_mse(double mse);

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}); throws NotPsdError when a
// covariance has an eigenvalue below -1e-8.
double frechet_distance(std::span<const double> mu1, std::span<const double> cov1,
                        std::span<const double> mu2, std::span<const double> cov2);

struct GaussianStats {
  std::vector<double> mean;
  std::vector<double> cov;  // row-major dim x dim, unbiased
};

GaussianStats embed_set(const FeatureExtractor& extractor, std::span<const Image> images);
GaussianStats gaussian_stats(std::span<const std::vector<double>> vectors);

}  // namespace cri
