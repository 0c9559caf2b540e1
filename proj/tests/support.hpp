#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "cri/generator.hpp"
#include "cri/image.hpp"
#include "cri/rng.hpp"

namespace cri::test {

inline Image random_image(Engine& e, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (double& v : img.data) v = u(e);
  return img;
}

inline std::vector<double> unit(Engine& e, std::size_t n) {
  auto v = normal_vector(e, n);
  const double s = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= s;
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Relative error between an analytic directional derivative and the central
// difference of f along v with step h.
inline double directional_error(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& x, const std::vector<double>& v, double analytic,
                                double h = 1e-5) {
  std::vector<double> plus = x, minus = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus[i] += h * v[i];
    minus[i] -= h * v[i];
  }
  const double numeric = (f(plus) - f(minus)) / (2 * h);
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

inline LatentW with_values(const LatentW& shape, const std::vector<double>& v) {
  LatentW w(shape.layers(), shape.dim());
  std::copy(v.begin(), v.end(), w.values().begin());
  return w;
}

inline LatentW random_w_plus(const ToyGenerator& gen, Engine& e, ClassLabel c, double spread = 0.3) {
  LatentW w = gen.mapping(gen.sample_z(e), c);
  const auto n = normal_vector(e, w.size(), spread);
  for (std::size_t i = 0; i < n.size(); ++i) w.values()[i] += n[i];
  return w;
}

}  // namespace cri::test
