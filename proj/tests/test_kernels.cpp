#include <doctest.h>

#include "cri/kernels/kernels.hpp"
#include "support.hpp"

using namespace cri;
using namespace cri::kernels;

namespace {

std::vector<Blob> random_blobs(Engine& e, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Blob> blobs(n);
  for (auto& b : blobs) {
    b.cx = u(e);
    b.cy = u(e);
    b.sigma = 0.05 + 0.2 * u(e);
    b.color = {u(e) * 2 - 1, u(e) * 2 - 1, u(e) * 2 - 1};
    b.amp = 3 * u(e) - 1.5;
  }
  return blobs;
}

FeatureMap random_map(Engine& e, int c, int h, int w) {
  FeatureMap m(c, h, w);
  m.data = normal_vector(e, m.data.size());
  return m;
}

}  // namespace

TEST_CASE("render: serial and omp agree") {
  Engine e = make_engine(1, Stream::Probes);
  const auto blobs = random_blobs(e, 6);
  const std::array<double, 3> bias{0.1, -0.2, 0.3};
  Image a(32, 32), b(32, 32);
  serial::render(blobs, bias, a);
  omp::render(blobs, bias, b);
  CHECK(a == b);

  const Image g = test::random_image(e, 32, 32);
  RenderGrad ga, gb;
  serial::render_backward(blobs, a, g, ga);
  omp::render_backward(blobs, a, g, gb);
  REQUIRE(ga.blobs.size() == gb.blobs.size());
  for (std::size_t i = 0; i < ga.blobs.size(); ++i) CHECK(gb.blobs[i] == doctest::Approx(ga.blobs[i]).epsilon(1e-12));
  for (int c = 0; c < 3; ++c) CHECK(gb.bias[c] == doctest::Approx(ga.bias[c]).epsilon(1e-12));
}

TEST_CASE("render: zero amplitude gives logistic(bias)") {
  std::vector<Blob> blobs(3);
  const std::array<double, 3> bias{0.4, -1.0, 2.0};
  Image out(8, 8);
  serial::render(blobs, bias, out);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == logistic(bias[c]));
}

TEST_CASE("render_backward matches finite differences") {
  Engine e = make_engine(2, Stream::Probes);
  auto blobs = random_blobs(e, 3);
  const std::array<double, 3> bias{0.0, 0.1, -0.1};
  const Image r = test::random_image(e, 16, 16);
  Image out(16, 16);
  serial::render(blobs, bias, out);
  RenderGrad g;
  serial::render_backward(blobs, out, r, g);
  auto loss = [&](const std::vector<Blob>& bs) {
    Image o(16, 16);
    serial::render(bs, bias, o);
    return test::dot(o.data, r.data);
  };
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    for (int slot = 0; slot < kBlobGradSize; ++slot) {
      auto plus = blobs, minus = blobs;
      auto field = [&](Blob& b) -> double& {
        switch (slot) {
          case 0: return b.cx;
          case 1: return b.cy;
          case 2: return b.sigma;
          case 6: return b.amp;
          default: return b.color[slot - 3];
        }
      };
      field(plus[i]) += h;
      field(minus[i]) -= h;
      const double numeric = (loss(plus) - loss(minus)) / (2 * h);
      CHECK(g.blobs[i * kBlobGradSize + slot] == doctest::Approx(numeric).epsilon(1e-5));
    }
  }
}

TEST_CASE("conv3x3: serial and omp agree, adjoint identity holds") {
  Engine e = make_engine(3, Stream::Probes);
  const FeatureMap in = random_map(e, 3, 12, 10);
  const auto w = normal_vector(e, 5 * 3 * 9);
  const auto b = normal_vector(e, 5);
  FeatureMap a(5, 12, 10), o(5, 12, 10);
  serial::conv3x3(in, w, b, a);
  omp::conv3x3(in, w, b, o);
  CHECK(a.data == o.data);

  const FeatureMap g = random_map(e, 5, 12, 10);
  FeatureMap gi_s(3, 12, 10), gi_o(3, 12, 10);
  serial::conv3x3_backward_input(g, w, gi_s);
  omp::conv3x3_backward_input(g, w, gi_o);
  CHECK(gi_s.data == gi_o.data);

  // <conv(x) - conv(0), g> == <x, conv^T g>
  const std::vector<double> zero_bias(5, 0.0);
  FeatureMap lin(5, 12, 10);
  serial::conv3x3(in, w, zero_bias, lin);
  CHECK(test::dot(lin.data, g.data) == doctest::Approx(test::dot(in.data, gi_s.data)).epsilon(1e-12));
}

TEST_CASE("conv3x3 hand example: centered kernel copies the input") {
  FeatureMap in(1, 3, 3);
  for (int i = 0; i < 9; ++i) in.data[i] = i + 1;
  std::vector<double> w(9, 0.0);
  w[4] = 1.0;
  const std::vector<double> b{0.5};
  FeatureMap out(1, 3, 3);
  serial::conv3x3(in, w, b, out);
  for (int i = 0; i < 9; ++i) CHECK(out.data[i] == in.data[i] + 0.5);
}

TEST_CASE("assign_nearest: serial and omp agree with a brute-force loop") {
  Engine e = make_engine(4, Stream::Probes);
  const int n = 300, dim = 5, k = 7;
  const auto pts = normal_vector(e, n * dim);
  const auto ctr = normal_vector(e, k * dim);
  std::vector<int> ls(n), lo(n);
  std::vector<double> ds(n), dd(n);
  serial::assign_nearest(pts, dim, ctr, ls, ds);
  omp::assign_nearest(pts, dim, ctr, lo, dd);
  CHECK(ls == lo);
  CHECK(ds == dd);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double bd = INFINITY;
    for (int c = 0; c < k; ++c) {
      double s = 0;
      for (int d = 0; d < dim; ++d) s += (pts[i * dim + d] - ctr[c * dim + d]) * (pts[i * dim + d] - ctr[c * dim + d]);
      if (s < bd) bd = s, best = c;
    }
    CHECK(ls[i] == best);
  }
}

TEST_CASE("assign_nearest: ties go to the lowest index") {
  const std::vector<double> pts{0.0, 0.0};
  const std::vector<double> ctr{1.0, 0.0, -1.0, 0.0, 0.0, 1.0};
  std::vector<int> l(1);
  std::vector<double> d(1);
  omp::assign_nearest(pts, 2, ctr, l, d);
  CHECK(l[0] == 0);
  CHECK(d[0] == 1.0);
}
