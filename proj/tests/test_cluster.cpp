#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "cri/cluster.hpp"
#include "cri/errors.hpp"
#include "support.hpp"

using namespace cri;

TEST_CASE("two clusters on the four-point fixture match the brute-force optimum") {
  const PointMatrix pts{4, 2, {0, 0, 0, 1, 10, 0, 10, 1}};
  // Brute-force oracle over all 2-partitions.
  double best = INFINITY;
  int best_mask = 0;
  for (int mask = 1; mask < 15; ++mask) {
    double cost = 0;
    for (int side = 0; side < 2; ++side) {
      double cx = 0, cy = 0;
      int n = 0;
      for (int i = 0; i < 4; ++i)
        if ((mask >> i & 1) == side) cx += pts.row(i)[0], cy += pts.row(i)[1], ++n;
      cx /= n, cy /= n;
      for (int i = 0; i < 4; ++i)
        if ((mask >> i & 1) == side) cost += std::pow(pts.row(i)[0] - cx, 2) + std::pow(pts.row(i)[1] - cy, 2);
    }
    if (cost < best) best = cost, best_mask = mask;
  }
  CHECK(best == 1.0);
  CHECK((best_mask == 3 || best_mask == 12));

  const KMeansResult r = kmeans(pts, 2, ClusterConfig{});
  CHECK(r.inertia == doctest::Approx(best).epsilon(1e-12));
  const int lo = r.centers.row(0)[0] < r.centers.row(1)[0] ? 0 : 1;
  CHECK(r.centers.row(lo)[0] == doctest::Approx(0.0));
  CHECK(r.centers.row(lo)[1] == doctest::Approx(0.5));
  CHECK(r.centers.row(1 - lo)[0] == doctest::Approx(10.0));
  CHECK(r.centers.row(1 - lo)[1] == doctest::Approx(0.5));
  CHECK(r.sizes[0] == 2);
}

TEST_CASE("N=1 is the sample mean and N=M has zero inertia") {
  Engine e = make_engine(1, Stream::Probes);
  const PointMatrix pts{50, 3, normal_vector(e, 150)};
  const KMeansResult one = kmeans(pts, 1, ClusterConfig{});
  const auto mean = column_mean(pts);
  for (int d = 0; d < 3; ++d) CHECK(std::abs(one.centers.row(0)[d] - mean[d]) < 1e-9);
  CHECK(mean_only(pts).centers.data == one.centers.data);

  const KMeansResult all = kmeans(pts, 50, ClusterConfig{});
  CHECK(all.inertia == 0.0);
  for (int s : all.sizes) CHECK(s == 1);
}

TEST_CASE("k-means is deterministic and never worse than its seeding") {
  Engine e = make_engine(2, Stream::Probes);
  const PointMatrix pts{400, 4, normal_vector(e, 1600)};
  ClusterConfig cfg;
  cfg.seed = 9;
  const KMeansResult a = kmeans(pts, 6, cfg), b = kmeans(pts, 6, cfg);
  CHECK(a.centers.data == b.centers.data);
  CHECK(a.labels == b.labels);
  CHECK(a.inertia <= a.seed_inertia);
  for (std::size_t i = 1; i < a.inertia_history.size(); ++i) CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] + 1e-12);
}

TEST_CASE("duplicate points") {
  const PointMatrix three{6, 1, {0, 0, 0, 0, 5, 9}};
  const KMeansResult r = kmeans(three, 3, ClusterConfig{});
  for (int s : r.sizes) CHECK(s >= 1);
  CHECK(r.inertia == 0.0);

  // Fewer distinct values than clusters: still terminates with finite centers.
  const PointMatrix two{6, 1, {0, 0, 0, 0, 0, 5}};
  const KMeansResult d = kmeans(two, 3, ClusterConfig{});
  CHECK(d.inertia == 0.0);
  CHECK(std::accumulate(d.sizes.begin(), d.sizes.end(), 0) == 6);
  for (double v : d.centers.data) CHECK(std::isfinite(v));
}

TEST_CASE("too few points is an error") {
  const PointMatrix pts{2, 1, {0, 1}};
  CHECK_THROWS_AS(kmeans(pts, 3, ClusterConfig{}), ClusterError);
  CHECK_THROWS_AS(kmeans(pts, 0, ClusterConfig{}), ClusterError);
}

TEST_CASE("sample_latents: empty, deterministic, unbiased on one mode") {
  const ToyGenerator gen(1234);
  CHECK(sample_latents(gen, ClassLabel{0}, 0, 1).empty());
  CHECK(sample_latents(gen, ClassLabel{0}, 20, 1) == sample_latents(gen, ClassLabel{0}, 20, 1));

  GeneratorLayout one_mode;
  one_mode.modes = 1;
  const ToyGenerator g1(1234, one_mode);
  const int m = 10000;
  const auto rows = stack_rows(sample_latents(g1, ClassLabel{1}, m, 4));
  const auto mean = column_mean(rows);
  // Independent Monte Carlo reference for the per-coordinate mean and spread.
  Engine e = make_engine(77, Stream::Probes);
  std::vector<double> ref_mean(rows.cols, 0.0), ref_sq(rows.cols, 0.0);
  const int n_ref = 40000;
  for (int i = 0; i < n_ref; ++i) {
    const auto r = g1.map_row(g1.sample_z(e), ClassLabel{1});
    for (int d = 0; d < rows.cols; ++d) ref_mean[d] += r[d] / n_ref, ref_sq[d] += r[d] * r[d] / n_ref;
  }
  for (int d = 0; d < rows.cols; ++d) {
    const double sigma = std::sqrt(std::max(ref_sq[d] - ref_mean[d] * ref_mean[d], 0.0));
    CHECK(std::abs(mean[d] - ref_mean[d]) < 3 * sigma * std::sqrt(1.0 / m + 1.0 / n_ref) + 1e-12);
  }
}

TEST_CASE("centroid selection") {
  const ToyGenerator gen(1234);
  const FeatureExtractor fx;
  ClusterConfig cfg;
  cfg.samples = 500;
  cfg.clusters = 5;
  const CentroidSet set = build_centroids(gen, ClassLabel{1}, cfg);
  REQUIRE(set.size() == 5);
  const auto identity = DegradationSpec::identity();

  SUBCASE("a center image selects itself") {
    const Selection s = select_centroid(set.center_images[2], set, fx, identity);
    CHECK(s.index == 2);
    CHECK(s.distances[2] == 0.0);
    CHECK(s.latent == set.latent(2));
  }

  SUBCASE("argmin agrees with an exhaustive distance table") {
    Engine e = make_engine(3, Stream::Probes);
    const auto spec = DegradationSpec::grayscale();
    for (int i = 0; i < 10; ++i) {
      const Image target = apply(spec, gen.synthesis(test::random_w_plus(gen, e, ClassLabel{1})));
      const Selection s = select_centroid(target, set, fx, spec);
      int best = 0;
      for (int k = 1; k < set.size(); ++k) {
        if (fx.distance(target, set.center_images[k]) < fx.distance(target, set.center_images[best])) best = k;
      }
      CHECK(s.index == best);
    }
  }

  SUBCASE("identical centers: lowest index wins") {
    CentroidSet dup = set;
    dup.center_images[3] = dup.center_images[1];
    const Selection s = select_centroid(dup.center_images[1], dup, fx, identity);
    CHECK(s.index == 1);
  }

  SUBCASE("selection is invariant under permutation of the set") {
    Engine e = make_engine(4, Stream::Probes);
    const Image target = gen.synthesis(test::random_w_plus(gen, e, ClassLabel{1}));
    const Selection s = select_centroid(target, set, fx, identity);
    CentroidSet rev = set;
    std::reverse(rev.center_images.begin(), rev.center_images.end());
    for (int k = 0; k < set.size(); ++k) {
      std::copy(set.centers.row(k).begin(), set.centers.row(k).end(),
                rev.centers.data.begin() + static_cast<std::ptrdiff_t>((set.size() - 1 - k) * set.centers.cols));
    }
    const Selection r = select_centroid(target, rev, fx, identity);
    CHECK(r.index == set.size() - 1 - s.index);
    CHECK(r.latent == s.latent);
  }
}

TEST_CASE("centroid sets persist and reload") {
  const ToyGenerator gen(1234);
  ClusterConfig cfg;
  cfg.samples = 300;
  cfg.clusters = 4;
  cfg.seed = 2;
  const CentroidSet set = build_centroids(gen, ClassLabel{3}, cfg);
  const std::string key = centroid_key(1234, ClassLabel{3}, 300, 4, 2);
  CHECK(key.find("c3") != std::string::npos);
  const auto dir = std::filesystem::temp_directory_path() / "cri-test-centroids";
  std::filesystem::remove_all(dir);
  save_centroids(dir, key, set);
  const CentroidSet back = load_centroids(dir, key, gen);
  CHECK(back.centers.data == set.centers.data);
  CHECK(back.sizes == set.sizes);
  CHECK(back.center_images == set.center_images);
  CHECK_THROWS_AS(load_centroids(dir, "nope", gen), IoError);
  std::filesystem::remove_all(dir);
}
