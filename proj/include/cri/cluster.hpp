#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cri/degrade.hpp"
#include "cri/generator.hpp"
#include "cri/perception.hpp"

namespace cri {

struct ClusterConfig {
  int samples = 10000;
  int clusters = 10;
  int max_iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  // Compare D(center image) instead of the clean center image when selecting.
  bool degrade_centers = false;

  bool operator==(const ClusterConfig&) const = default;
};

// Row-major n x dim point cloud.
struct PointMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
};

struct KMeansResult {
  PointMatrix centers;
  std::vector<int> labels;
  std::vector<int> sizes;
  double inertia = 0.0;
  double seed_inertia = 0.0;  // after k-means++ seeding, before any Lloyd step
  std::vector<double> inertia_history;  // after every assignment step
  int iterations = 0;
};

struct CentroidSet {
  PointMatrix centers;
  std::vector<Image> center_images;
  std::vector<int> sizes;
  double inertia = 0.0;
  int layers = 0;
  int dim = 0;

  int size() const { return centers.rows; }
  // Broadcasts W-space centers; reshapes flattened W+ centers.
  LatentW latent(int i) const;
};

struct Selection {
  int index = 0;
  LatentW latent;
  std::vector<double> distances;
};

std::vector<LatentZ> sample_z(const ToyGenerator& generator, int count, std::uint64_t seed);
std::vector<LatentW> sample_latents(const ToyGenerator& generator, ClassLabel c, int count,
                                    std::uint64_t seed);
// Row 0 of each (W-space) latent, stacked.
PointMatrix stack_rows(std::span<const LatentW> latents);
// Every row of every latent flattened into one vector per latent (W+ inputs).
PointMatrix stack_flat(std::span<const LatentW> latents);

std::vector<double> column_mean(const PointMatrix& points);

// Lloyd's algorithm with k-means++ seeding. Throws ClusterError when there are
// fewer points than clusters.
KMeansResult kmeans(const PointMatrix& points, int clusters, const ClusterConfig& config);

// Center set made of the sample mean alone (the usual average-latent start).
KMeansResult mean_only(const PointMatrix& points);

CentroidSet make_centroid_set(const ToyGenerator& generator, const KMeansResult& clustering);

// Samples the class, clusters it, and renders every center.
CentroidSet build_centroids(const ToyGenerator& generator, ClassLabel c, const ClusterConfig& config);

// Nearest center in feature space; ties go to the lowest index.
Selection select_centroid(const Image& degraded, const CentroidSet& centroids,
                          const FeatureExtractor& extractor, const DegradationSpec& spec,
                          bool degrade_centers = false);

// Cache key for persisted centroid sets.
std::string centroid_key(std::uint64_t generator_seed, ClassLabel c, int samples, int clusters,
                         std::uint64_t seed);
void save_centroids(const std::filesystem::path& dir, const std::string& key, const CentroidSet& set);
// Center images are re-rendered from the generator on load.
CentroidSet load_centroids(const std::filesystem::path& dir, const std::string& key,
                           const ToyGenerator& generator);

}  // namespace cri
