#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cri {

struct LatentZ {
  std::vector<double> values;

  bool operator==(const LatentZ&) const = default;
};

struct ClassLabel {
  int index = 0;

  bool operator==(const ClassLabel&) const = default;
};

// Per-layer stack of style vectors (layers x dim, row-major). A W-space
// element has identical rows; a W+ element may differ per row.
class LatentW {
 public:
  LatentW() = default;
  LatentW(int layers, int dim, double fill = 0.0)
      : layers_(layers), dim_(dim), values_(static_cast<std::size_t>(layers) * dim, fill) {}

  static LatentW broadcast(std::span<const double> row, int layers);

  int layers() const { return layers_; }
  int dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> row(int l) {
    return {values_.data() + static_cast<std::size_t>(l) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> row(int l) const {
    return {values_.data() + static_cast<std::size_t>(l) * dim_, static_cast<std::size_t>(dim_)};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const LatentW& other) const {
    return layers_ == other.layers_ && dim_ == other.dim_;
  }
  bool is_w_space() const;
  bool all_finite() const;
  double norm() const;
  double norm_l1() const;

  LatentW& operator+=(const LatentW& other);
  LatentW& operator-=(const LatentW& other);
  LatentW& operator*=(double s);
  friend LatentW operator+(LatentW a, const LatentW& b) { return a += b; }
  friend LatentW operator-(LatentW a, const LatentW& b) { return a -= b; }
  friend LatentW operator*(LatentW a, double s) { return a *= s; }

  bool operator==(const LatentW&) const = default;

 private:
  int layers_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

}  // namespace cri
