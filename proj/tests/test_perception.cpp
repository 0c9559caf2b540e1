#include <doctest.h>

#include <filesystem>

#include "cri/errors.hpp"
#include "cri/perception.hpp"
#include "support.hpp"

using namespace cri;

namespace {

Image lerp(const Image& a, const Image& b, double t) {
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] + t * (b.data[i] - a.data[i]);
  return out;
}

}  // namespace

TEST_CASE("perceptual distance is a pseudometric") {
  const FeatureExtractor fx;
  Engine e = make_engine(1, Stream::Probes);
  for (int i = 0; i < 10; ++i) {
    const Image x = test::random_image(e, 32, 32);
    const Image y = test::random_image(e, 32, 32);
    CHECK(fx.distance(x, x) == 0.0);
    CHECK(fx.distance(x, y) > 0.0);
    CHECK(fx.distance(x, y) == doctest::Approx(fx.distance(y, x)).epsilon(1e-14));
  }
}

TEST_CASE("distance grows along the straight path from x to y") {
  const FeatureExtractor fx;
  const ToyGenerator gen(1234);
  Engine e = make_engine(2, Stream::Probes);
  const Image x = gen.synthesis(test::random_w_plus(gen, e, ClassLabel{0}));
  const Image y = gen.synthesis(test::random_w_plus(gen, e, ClassLabel{1}));
  const double d0 = fx.distance(x, lerp(x, y, 0.0));
  const double d5 = fx.distance(x, lerp(x, y, 0.5));
  const double d1 = fx.distance(x, lerp(x, y, 1.0));
  CHECK(d0 == 0.0);
  CHECK(d0 < d5);
  CHECK(d5 < d1);
}

TEST_CASE("perceptual gradient matches finite differences") {
  const FeatureExtractor fx;
  Engine e = make_engine(3, Stream::Probes);
  for (int probe = 0; probe < 10; ++probe) {
    const Image target = test::random_image(e, 32, 32);
    const Image x = test::random_image(e, 32, 32);
    const FeatureEmbedding te = fx.embed(target);
    Image g;
    const double d = fx.distance_with_grad(te, x, g);
    CHECK(d == doctest::Approx(fx.distance(target, x)).epsilon(1e-12));
    const auto v = test::unit(e, x.size());
    const double err = test::directional_error(
        [&](const std::vector<double>& px) {
          Image img(32, 32);
          img.data = px;
          return fx.distance(te, fx.embed(img));
        },
        x.data, v, test::dot(g.data, v));
    CHECK(err < 1e-3);
  }
}

TEST_CASE("low-resolution inputs are compared after bilinear upsampling") {
  const FeatureExtractor fx;
  Engine e = make_engine(4, Stream::Probes);
  const Image small = test::random_image(e, 8, 8);
  const Image big = upsample_bilinear(small, 4);
  CHECK(big.height == 32);
  CHECK(fx.distance(fx.embed(small), fx.embed(big)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(fx.distance(small, big), ShapeMismatchError);
  Image g;
  fx.distance_with_grad(fx.embed(test::random_image(e, 32, 32)), small, g);
  CHECK(g.height == 8);
  CHECK_THROWS_AS(fx.embed(test::random_image(e, 12, 12)), ShapeMismatchError);
}

TEST_CASE("bilinear upsampling adjoint") {
  Engine e = make_engine(5, Stream::Probes);
  Image x(8, 8), y(32, 32);
  x.data = normal_vector(e, x.size());
  y.data = normal_vector(e, y.size());
  CHECK(test::dot(upsample_bilinear(x, 4).data, y.data) ==
        doctest::Approx(test::dot(x.data, upsample_bilinear_adjoint(y, 4).data)).epsilon(1e-12));
  const Image flat(4, 4, 0.25);
  for (double v : upsample_bilinear(flat, 2).data) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("pixel_l2 spot values and independent summation") {
  CHECK(pixel_l2(Image(4, 4, 0.0), Image(4, 4, 1.0)) == 1.0);
  Engine e = make_engine(6, Stream::Probes);
  const Image x = test::random_image(e, 32, 32), y = test::random_image(e, 32, 32);
  CHECK(pixel_l2(x, x) == 0.0);
  double s = 0.0;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      for (int ch = 0; ch < 3; ++ch) s += (x.at(r, c, ch) - y.at(r, c, ch)) * (x.at(r, c, ch) - y.at(r, c, ch));
  CHECK(pixel_l2(x, y) == doctest::Approx(s / (32 * 32 * 3)).epsilon(1e-12));
  CHECK_THROWS_AS(pixel_l2(x, Image(8, 8)), ShapeMismatchError);
}

TEST_CASE("psnr spot values") {
  CHECK(psnr_from_mse(0.01) == 20.0);
  CHECK(psnr_from_mse(1.0) == 0.0);
  const Image x(4, 4, 0.3);
  CHECK(psnr(x, x) == 99.0);
}

TEST_CASE("frechet distance closed forms") {
  const std::vector<double> zero{0.0}, two{2.0}, one{1.0}, four{4.0};
  CHECK(frechet_distance(zero, one, two, one) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(frechet_distance(zero, one, zero, four) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> mu{0.3, -1.0}, cov{2.0, 0.5, 0.5, 1.0};
  CHECK(frechet_distance(mu, cov, mu, cov) == doctest::Approx(0.0).epsilon(1e-12));
  Engine e = make_engine(7, Stream::Probes);
  std::uniform_real_distribution<double> u(-3, 3), v(0.01, 4);
  for (int i = 0; i < 100; ++i) {
    const double m1 = u(e), m2 = u(e), s1 = v(e), s2 = v(e);
    const double closed = (m1 - m2) * (m1 - m2) + s1 + s2 - 2 * std::sqrt(s1 * s2);
    CHECK(std::abs(frechet_distance(std::vector{m1}, std::vector{s1}, std::vector{m2}, std::vector{s2}) - closed) <
          1e-8);
  }
  CHECK_THROWS_AS(frechet_distance(zero, std::vector{-1.0}, zero, one), NotPsdError);
  CHECK_THROWS_AS(frechet_distance(mu, cov, zero, one), ShapeMismatchError);
}

TEST_CASE("frechet distance with diagonal covariances") {
  // Commuting case: sum over dimensions of the 1-D closed form.
  const std::vector<double> m1{1.0, 0.0, -1.0}, m2{0.0, 0.5, 1.0};
  const std::vector<double> c1{1, 0, 0, 0, 2, 0, 0, 0, 3}, c2{4, 0, 0, 0, 1, 0, 0, 0, 0.5};
  double closed = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double a = c1[i * 4], b = c2[i * 4];
    closed += (m1[i] - m2[i]) * (m1[i] - m2[i]) + a + b - 2 * std::sqrt(a * b);
  }
  CHECK(frechet_distance(m1, c1, m2, c2) == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("embed_set statistics") {
  const FeatureExtractor fx;
  Engine e = make_engine(8, Stream::Probes);
  const Image a = test::random_image(e, 32, 32), b = test::random_image(e, 32, 32);
  const std::vector<Image> same{a, a, a};
  for (double v : embed_set(fx, same).cov) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));

  const std::vector<Image> pair{a, b};
  const auto stats = embed_set(fx, pair);
  const auto pa = fx.embed(a).pooled(), pb = fx.embed(b).pooled();
  REQUIRE(stats.mean.size() == pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(stats.mean[i] == doctest::Approx((pa[i] + pb[i]) / 2).epsilon(1e-12));

  const std::vector<Image> swapped{b, a};
  const auto s2 = embed_set(fx, swapped);
  for (std::size_t i = 0; i < stats.mean.size(); ++i) CHECK(s2.mean[i] == doctest::Approx(stats.mean[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < stats.cov.size(); ++i) CHECK(s2.cov[i] == doctest::Approx(stats.cov[i]).epsilon(1e-12));
}

TEST_CASE("extractor weights round-trip through save/load") {
  const FeatureExtractor fx(ExtractorConfig{99, 32, 3, 16});
  const auto dir = std::filesystem::temp_directory_path() / "cri-test-extractor";
  std::filesystem::create_directories(dir);
  fx.save(dir / "fx.json");
  const FeatureExtractor back = FeatureExtractor::load(dir / "fx.json");
  Engine e = make_engine(9, Stream::Probes);
  const Image x = test::random_image(e, 32, 32), y = test::random_image(e, 32, 32);
  // Weights are stored as float32, so distances agree to single precision.
  CHECK(back.distance(x, y) == doctest::Approx(fx.distance(x, y)).epsilon(1e-5));
  CHECK(back.config() == fx.config());
  CHECK_THROWS_AS(FeatureExtractor::load(dir / "missing.json"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("different extractor seeds give different distances") {
  Engine e = make_engine(10, Stream::Probes);
  const Image x = test::random_image(e, 32, 32), y = test::random_image(e, 32, 32);
  CHECK(FeatureExtractor(ExtractorConfig{1}).distance(x, y) != FeatureExtractor(ExtractorConfig{2}).distance(x, y));
}
