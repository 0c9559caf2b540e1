#include "cri/latent.hpp"

#include <cmath>
#include <stdexcept>

#include "cri/errors.hpp"

namespace cri {

LatentW LatentW::broadcast(std::span<const double> row, int layers) {
  LatentW w(layers, static_cast<int>(row.size()));
  for (int l = 0; l < layers; ++l) {
    std::copy(row.begin(), row.end(), w.row(l).begin());
  }
  return w;
}

bool LatentW::is_w_space() const {
  for (int l = 1; l < layers_; ++l) {
    for (int i = 0; i < dim_; ++i) {
      if (row(l)[i] != row(0)[i]) return false;
    }
  }
  return true;
}

bool LatentW::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double LatentW::norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double LatentW::norm_l1() const {
  double s = 0.0;
  for (double v : values_) s += std::abs(v);
  return s;
}

LatentW& LatentW::operator+=(const LatentW& other) {
  if (!same_shape(other)) throw ShapeMismatchError("latent shapes differ");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

LatentW& LatentW::operator-=(const LatentW& other) {
  if (!same_shape(other)) throw ShapeMismatchError("latent shapes differ");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

LatentW& LatentW::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

}  // namespace cri
