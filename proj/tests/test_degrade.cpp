#include <doctest.h>

#include "cri/degrade.hpp"
#include "cri/errors.hpp"
#include "support.hpp"

using namespace cri;

namespace {

Image grid4() {
  Image g(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) g.at(y, x, c) = y * 4 + x + 1;
  return g;
}

Mask full_mask(int h, int w, std::uint8_t v) { return Mask{h, w, std::vector<std::uint8_t>(h * w, v)}; }

}  // namespace

TEST_CASE("all-ones mask is the identity") {
  Engine e = make_engine(1, Stream::Probes);
  const Image x = test::random_image(e, 8, 8);
  CHECK(apply(DegradationSpec::masked(full_mask(8, 8, 1)), x) == x);
}

TEST_CASE("grayscale keeps white white and is idempotent") {
  Image white(2, 2, 1.0);
  CHECK(apply(DegradationSpec::grayscale(), white) == white);
  Engine e = make_engine(2, Stream::Probes);
  const Image x = test::random_image(e, 16, 16);
  const auto g = DegradationSpec::grayscale();
  CHECK(apply(g, apply(g, x)) == apply(g, x));
  const Image y = apply(g, x);
  CHECK(y.at(3, 4, 0) == doctest::Approx(kLumaR * x.at(3, 4, 0) + kLumaG * x.at(3, 4, 1) + kLumaB * x.at(3, 4, 2)).epsilon(1e-15));
}

TEST_CASE("mask is idempotent and zeroes hidden pixels") {
  Engine e = make_engine(3, Stream::Probes);
  const Image x = test::random_image(e, 32, 32);
  const Mask m = centered_box_mask(32, 32);
  const auto spec = DegradationSpec::masked(m);
  CHECK(apply(spec, apply(spec, x)) == apply(spec, x));
  int hidden = 0;
  for (auto b : m.bits) hidden += b == 0;
  CHECK(hidden == 256);
  CHECK(apply(spec, x).at(16, 16, 0) == 0.0);
  CHECK(apply(spec, x).at(0, 0, 1) == x.at(0, 0, 1));
}

TEST_CASE("box downsample of the 1..16 grid") {
  const Image out = apply(DegradationSpec::downsample(2), grid4());
  REQUIRE(out.height == 2);
  REQUIRE(out.width == 2);
  for (int c = 0; c < 3; ++c) {
    CHECK(out.at(0, 0, c) == 3.5);
    CHECK(out.at(0, 1, c) == 5.5);
    CHECK(out.at(1, 0, c) == 11.5);
    CHECK(out.at(1, 1, c) == 13.5);
  }
  const Image nearest = apply(DegradationSpec::downsample(2, DownsampleKernel::Nearest), grid4());
  CHECK(nearest.at(0, 0, 0) == 6.0);
  CHECK(nearest.at(1, 1, 2) == 16.0);
}

TEST_CASE("SR output is H/s x W/s") {
  const auto spec = DegradationSpec::downsample(4);
  CHECK(spec.output_height(32) == 8);
  CHECK(apply(spec, Image(32, 32)).width == 8);
}

TEST_CASE("every operator is linear and its adjoint satisfies <Dx, y> = <x, D^T y>") {
  Engine e = make_engine(4, Stream::Probes);
  const Image x = test::random_image(e, 32, 32);
  Image p(32, 32);
  p.data = normal_vector(e, p.size());
  for (const auto& spec : {DegradationSpec::identity(), DegradationSpec::grayscale(),
                           DegradationSpec::masked(centered_box_mask(32, 32)), DegradationSpec::downsample(4),
                           DegradationSpec::downsample(2, DownsampleKernel::Nearest)}) {
    CAPTURE(to_string(spec.kind));
    CHECK(linearity_residual(spec, x, p) < 1e-10);
    const Image dx = apply(spec, x);
    Image y(dx.height, dx.width);
    y.data = normal_vector(e, y.size());
    const Image dty = apply_adjoint(spec, y, 32, 32);
    CHECK(test::dot(dx.data, y.data) == doctest::Approx(test::dot(x.data, dty.data)).epsilon(1e-12));
  }
}

TEST_CASE("outputs stay in [0, 1] for inputs in [0, 1]") {
  Engine e = make_engine(5, Stream::Probes);
  const Image x = test::random_image(e, 32, 32);
  for (const auto& spec : {DegradationSpec::grayscale(), DegradationSpec::masked(centered_box_mask(32, 32)),
                           DegradationSpec::downsample(4)}) {
    for (double v : apply(spec, x).data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("malformed specs are rejected") {
  CHECK_THROWS_AS(DegradationSpec::downsample(3).validate(32, 32), InvalidSpecError);
  CHECK_THROWS_AS(DegradationSpec::downsample(0).validate(32, 32), InvalidSpecError);
  CHECK_THROWS_AS(DegradationSpec::masked(full_mask(8, 8, 1)).validate(32, 32), InvalidSpecError);
  DegradationSpec no_mask;
  no_mask.kind = DegradationKind::Mask;
  CHECK_THROWS_AS(no_mask.validate(32, 32), InvalidSpecError);
  CHECK_THROWS_AS(apply(DegradationSpec::downsample(3), Image(32, 32)), InvalidSpecError);
}

TEST_CASE("centered box mask covers the requested fraction") {
  const Mask m = centered_box_mask(32, 32, 0.25);
  int hidden = 0;
  for (auto b : m.bits) hidden += b == 0;
  CHECK(hidden == 32 * 32 / 4);
  CHECK(m.bits[0] == 1);
  CHECK(m.bits[16 * 32 + 16] == 0);
}
