#include <doctest.h>

#include <cmath>

#include "cri/cluster.hpp"
#include "cri/errors.hpp"
#include "cri/generator.hpp"
#include "support.hpp"

using namespace cri;

TEST_CASE("mapping at z = 0 is the affine constant of the lowest-index mode") {
  const ToyGenerator gen(1234);
  LatentZ z{std::vector<double>(gen.layout().z_dim, 0.0)};
  for (int c = 0; c < gen.layout().classes; ++c) {
    CHECK(gen.mode_index(z, ClassLabel{c}) == 0);
    const auto row = gen.map_row(z, ClassLabel{c});
    const auto anchor = gen.mode_anchor(ClassLabel{c}, 0);
    REQUIRE(row.size() == anchor.size());
    for (std::size_t i = 0; i < row.size(); ++i) CHECK(row[i] == doctest::Approx(anchor[i]).epsilon(1e-12));
  }
}

TEST_CASE("mapping is deterministic and emits W-space elements") {
  const ToyGenerator a(77), b(77);
  Engine e = make_engine(1, Stream::Probes);
  const LatentZ z = a.sample_z(e);
  const LatentW wa = a.mapping(z, ClassLabel{2});
  CHECK(wa == a.mapping(z, ClassLabel{2}));
  CHECK(wa == b.mapping(z, ClassLabel{2}));
  CHECK(wa.is_w_space());
  CHECK(wa.layers() == 6);
  CHECK(wa.dim() == 32);
}

TEST_CASE("different generator seeds give different weights") {
  const ToyGenerator a(1), b(2);
  CHECK(a.params() != b.params());
}

TEST_CASE("samples from distinct mode cones are far apart relative to intra-mode spread") {
  const ToyGenerator gen(1234);
  const ClassLabel c{0};
  Engine e = make_engine(2, Stream::Probes);
  std::vector<std::vector<std::vector<double>>> by_mode(gen.layout().modes);
  while (true) {
    const LatentZ z = gen.sample_z(e);
    auto& bucket = by_mode[gen.mode_index(z, c)];
    if (bucket.size() < 1000) bucket.push_back(gen.map_row(z, c));
    bool done = true;
    for (const auto& m : by_mode) done = done && m.size() >= 1000;
    if (done) break;
  }
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  std::vector<double> intra;
  for (int i = 0; i < 999; ++i) intra.push_back(dist(by_mode[0][i], by_mode[0][i + 1]));
  std::nth_element(intra.begin(), intra.begin() + intra.size() / 2, intra.end());
  const double median = intra[intra.size() / 2];
  for (int i = 0; i < 200; ++i) CHECK(dist(by_mode[0][i], by_mode[1][i]) > 5 * median);
}

TEST_CASE("k-means with N=K on 2000 samples recovers the mode anchors") {
  const ToyGenerator gen(1234);
  for (int c = 0; c < gen.layout().classes; ++c) {
    ClusterConfig cfg;
    cfg.samples = 2000;
    cfg.clusters = gen.layout().modes;
    const auto km = kmeans(stack_rows(sample_latents(gen, ClassLabel{c}, cfg.samples, 3)), cfg.clusters, cfg);
    double min_sep = INFINITY;
    std::vector<std::vector<double>> anchors;
    for (int k = 0; k < cfg.clusters; ++k) anchors.push_back(gen.mode_anchor(ClassLabel{c}, k));
    auto dist = [](std::span<const double> a, std::span<const double> b) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    };
    for (int a = 0; a < cfg.clusters; ++a)
      for (int b = a + 1; b < cfg.clusters; ++b) min_sep = std::min(min_sep, dist(anchors[a], anchors[b]));
    for (const auto& anchor : anchors) {
      double nearest = INFINITY;
      for (int k = 0; k < cfg.clusters; ++k) nearest = std::min(nearest, dist(km.centers.row(k), anchor));
      CHECK(nearest < 0.05 * min_sep);
    }
  }
}

TEST_CASE("zero amplitude readouts give a constant logistic(bias) image") {
  ToyGenerator gen(1234);
  GeneratorParams p = gen.snapshot();
  for (int l = 0; l < gen.layout().layers; ++l) {
    auto w = p.block("layer" + std::to_string(l) + ".readout.weight");
    auto b = p.block("layer" + std::to_string(l) + ".readout.bias");
    const int dim = gen.layout().w_dim;
    for (int j = 0; j < dim; ++j) w[kAmp * dim + j] = 0.0;
    b[kAmp] = 0.0;
  }
  Engine e = make_engine(3, Stream::Probes);
  const Image img = gen.synthesis(test::random_w_plus(gen, e, ClassLabel{1}), p);
  const auto bias = p.block("pixel.bias");
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) CHECK(img.at(y, x, c) == kernels::logistic(bias[c]));
}

TEST_CASE("snapshot, perturb, restore gives identical synthesis") {
  ToyGenerator gen(1234);
  Engine e = make_engine(4, Stream::Probes);
  const LatentW w = test::random_w_plus(gen, e, ClassLabel{0});
  const Image before = gen.synthesis(w);
  const GeneratorParams snap = gen.snapshot();
  GeneratorParams changed = snap;
  for (double& v : changed.values()) v += 0.1;
  gen.restore(changed);
  CHECK(gen.synthesis(w) != before);
  gen.restore(snap);
  CHECK(gen.synthesis(w) == before);
  CHECK(gen.snapshot() == snap);
}

TEST_CASE("restore rejects a snapshot with a different layout") {
  ToyGenerator gen(1234);
  GeneratorLayout small;
  small.layers = 3;
  const ToyGenerator other(1234, small);
  CHECK_THROWS_AS(gen.restore(other.snapshot()), CorruptSnapshotError);
}

TEST_CASE("invalid inputs are rejected") {
  const ToyGenerator gen(1234);
  Engine e = make_engine(5, Stream::Probes);
  const LatentZ z = gen.sample_z(e);
  CHECK_THROWS_AS(gen.mapping(z, ClassLabel{-1}), InvalidClassError);
  CHECK_THROWS_AS(gen.mapping(z, ClassLabel{4}), InvalidClassError);
  CHECK_THROWS_AS(gen.mapping(LatentZ{{1.0, 2.0}}, ClassLabel{0}), InvalidLatentError);
  LatentW bad = gen.zero_latent();
  bad.values()[3] = std::nan("");
  CHECK_THROWS_AS(gen.synthesis(bad), InvalidLatentError);
  CHECK_THROWS_AS(gen.synthesis(LatentW(2, 32)), InvalidLatentError);
}

TEST_CASE("W-space element synthesizes the same replicated or broadcast") {
  const ToyGenerator gen(1234);
  Engine e = make_engine(6, Stream::Probes);
  const LatentW w = gen.mapping(gen.sample_z(e), ClassLabel{3});
  const LatentW b = LatentW::broadcast(w.row(0), gen.layout().layers);
  CHECK(gen.synthesis(w) == gen.synthesis(b));
}

TEST_CASE("synthesis gradients match finite differences for w and params") {
  const ToyGenerator gen(1234);
  Engine e = make_engine(7, Stream::Probes);
  double worst_w = 0, worst_p = 0;
  for (int probe = 0; probe < 20; ++probe) {
    const LatentW w = test::random_w_plus(gen, e, ClassLabel{probe % 4});
    Image r(32, 32);
    r.data = normal_vector(e, r.size());
    const auto tape = gen.forward(w, gen.params());
    LatentW gw;
    GeneratorParams gp;
    gen.backward(w, gen.params(), tape, r, &gw, &gp);
    auto v = test::unit(e, w.size());
    worst_w = std::max(worst_w, test::directional_error(
                                    [&](const std::vector<double>& x) {
                                      return test::dot(gen.synthesis(test::with_values(w, x)).data, r.data);
                                    },
                                    w.values(), v, test::dot(gw.values(), v)));
    v = test::unit(e, gp.size());
    worst_p = std::max(worst_p, test::directional_error(
                                    [&](const std::vector<double>& x) {
                                      GeneratorParams p = gen.params();
                                      p.values() = x;
                                      return test::dot(gen.synthesis(w, p).data, r.data);
                                    },
                                    gen.params().values(), v, test::dot(gp.values(), v)));
  }
  CHECK(worst_w < 1e-3);
  CHECK(worst_p < 1e-3);
}

TEST_CASE("synthesis stays strictly inside (0, 1)") {
  const ToyGenerator gen(1234);
  Engine e = make_engine(8, Stream::Probes);
  for (int i = 0; i < 10; ++i) {
    const Image img = gen.synthesis(test::random_w_plus(gen, e, ClassLabel{i % 4}, 1.0));
    for (double v : img.data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}
