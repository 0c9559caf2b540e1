#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace cri {

// H x W x 3 image, row-major with interleaved channels, linear intensity in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  static constexpr int kChannels = 3;

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width;
  }

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool all_finite() const;

  friend bool operator==(const Image&, const Image&) = default;
};

// Single-channel binary mask; nonzero marks an observed pixel.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  bool operator==(const Mask&) const = default;
};

Image read_png(const std::filesystem::path& path);
Mask read_mask_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Quantizes to 8 bits and back; what a PNG round trip would give.
Image quantize8(const Image& image);

}  // namespace cri
