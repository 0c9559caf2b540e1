#include "cri/cluster.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "cri/errors.hpp"
#include "cri/rng.hpp"

namespace cri {

LatentW CentroidSet::latent(int i) const {
  if (centers.cols == dim) return LatentW::broadcast(centers.row(i), layers);
  if (centers.cols != layers * dim) throw ShapeMismatchError("centroid width matches neither W nor W+");
  LatentW w(layers, dim);
  auto r = centers.row(i);
  std::copy(r.begin(), r.end(), w.values().begin());
  return w;
}

std::vector<LatentZ> sample_z(const ToyGenerator& generator, int count, std::uint64_t seed) {
  Engine engine = make_engine(seed, Stream::LatentSamples);
  std::vector<LatentZ> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generator.sample_z(engine));
  return out;
}

std::vector<LatentW> sample_latents(const ToyGenerator& generator, ClassLabel c, int count,
                                    std::uint64_t seed) {
  std::vector<LatentW> out;
  out.reserve(count);
  for (const auto& z : sample_z(generator, count, seed)) out.push_back(generator.mapping(z, c));
  return out;
}

PointMatrix stack_rows(std::span<const LatentW> latents) {
  PointMatrix m;
  m.rows = static_cast<int>(latents.size());
  m.cols = latents.empty() ? 0 : latents.front().dim();
  m.data.reserve(static_cast<std::size_t>(m.rows) * m.cols);
  for (const auto& w : latents) {
    auto r = w.row(0);
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

PointMatrix stack_flat(std::span<const LatentW> latents) {
  PointMatrix m;
  m.rows = static_cast<int>(latents.size());
  m.cols = latents.empty() ? 0 : static_cast<int>(latents.front().size());
  for (const auto& w : latents) m.data.insert(m.data.end(), w.values().begin(), w.values().end());
  return m;
}

std::vector<double> column_mean(const PointMatrix& points) {
  std::vector<double> mean(points.cols, 0.0);
  for (int i = 0; i < points.rows; ++i) {
    auto r = points.row(i);
    for (int t = 0; t < points.cols; ++t) mean[t] += r[t];
  }
  for (double& m : mean) m /= static_cast<double>(points.rows);
  return mean;
}

namespace {

double sum_in_order(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

PointMatrix seed_plus_plus(const PointMatrix& points, int clusters, Engine& engine) {
  const int n = points.rows;
  const int d = points.cols;
  PointMatrix centers{clusters, d, {}};
  centers.data.reserve(static_cast<std::size_t>(clusters) * d);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<char> chosen(n, 0);
  int first = pick(engine);
  chosen[first] = 1;
  auto r0 = points.row(first);
  centers.data.insert(centers.data.end(), r0.begin(), r0.end());

  std::vector<double> dist2(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int t = 0; t < d; ++t) {
      const double diff = points.row(i)[t] - r0[t];
      s += diff * diff;
    }
    dist2[i] = s;
  }
  for (int c = 1; c < clusters; ++c) {
    const double total = sum_in_order(dist2);
    int next = -1;
    if (total > 0.0) {
      const double target = unit(engine) * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target && dist2[i] > 0.0) {
          next = i;
          break;
        }
      }
      if (next < 0) {
        for (int i = n - 1; i >= 0; --i) {
          if (dist2[i] > 0.0) {
            next = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point coincides with a center; take the first unused one.
      for (int i = 0; i < n; ++i) {
        if (!chosen[i]) {
          next = i;
          break;
        }
      }
    }
    chosen[next] = 1;
    auto r = points.row(next);
    centers.data.insert(centers.data.end(), r.begin(), r.end());
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int t = 0; t < d; ++t) {
        const double diff = points.row(i)[t] - r[t];
        s += diff * diff;
      }
      dist2[i] = std::min(dist2[i], s);
    }
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const PointMatrix& points, int clusters, const ClusterConfig& config) {
  if (clusters < 1) throw ClusterError("cluster count must be at least 1");
  if (points.rows < clusters) {
    throw ClusterError("need at least " + std::to_string(clusters) + " points, got " +
                       std::to_string(points.rows));
  }
  const int n = points.rows;
  const int d = points.cols;
  Engine engine = make_engine(config.seed, Stream::KMeansInit);

  KMeansResult res;
  res.centers = seed_plus_plus(points, clusters, engine);
  res.labels.assign(n, 0);
  std::vector<double> dist2(n);

  for (int iter = 0;; ++iter) {
    kernels::omp::assign_nearest(points.data, d, res.centers.data, res.labels, dist2);
    res.inertia = sum_in_order(dist2);
    res.inertia_history.push_back(res.inertia);
    if (iter == 0) res.seed_inertia = res.inertia;
    if (iter >= config.max_iters) break;

    std::vector<double> sums(static_cast<std::size_t>(clusters) * d, 0.0);
    std::vector<int> counts(clusters, 0);
    for (int i = 0; i < n; ++i) {
      const int c = res.labels[i];
      ++counts[c];
      auto r = points.row(i);
      for (int t = 0; t < d; ++t) sums[static_cast<std::size_t>(c) * d + t] += r[t];
    }
    PointMatrix next{clusters, d, std::vector<double>(sums.size())};
    for (int c = 0; c < clusters; ++c) {
      if (counts[c] > 0) {
        for (int t = 0; t < d; ++t) {
          next.data[static_cast<std::size_t>(c) * d + t] =
              sums[static_cast<std::size_t>(c) * d + t] / static_cast<double>(counts[c]);
        }
        continue;
      }
      // Empty cluster: move it onto the point worst served by its center.
      int far = 0;
      for (int i = 1; i < n; ++i) {
        if (dist2[i] > dist2[far]) far = i;
      }
      auto r = points.row(far);
      std::copy(r.begin(), r.end(), next.data.begin() + static_cast<std::ptrdiff_t>(c) * d);
      dist2[far] = 0.0;
    }

    double shift = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < next.data.size(); ++i) {
      const double diff = next.data[i] - res.centers.data[i];
      shift += diff * diff;
      scale += res.centers.data[i] * res.centers.data[i];
    }
    res.centers = std::move(next);
    res.iterations = iter + 1;
    if (shift <= config.tol * std::max(scale, std::numeric_limits<double>::min())) {
      kernels::omp::assign_nearest(points.data, d, res.centers.data, res.labels, dist2);
      res.inertia = sum_in_order(dist2);
      res.inertia_history.push_back(res.inertia);
      break;
    }
  }

  res.sizes.assign(clusters, 0);
  for (int l : res.labels) ++res.sizes[l];
  return res;
}

KMeansResult mean_only(const PointMatrix& points) {
  if (points.rows < 1) throw ClusterError("need at least one point");
  KMeansResult res;
  res.centers = PointMatrix{1, points.cols, column_mean(points)};
  res.labels.assign(points.rows, 0);
  std::vector<double> dist2(points.rows);
  kernels::omp::assign_nearest(points.data, points.cols, res.centers.data, res.labels, dist2);
  res.inertia = sum_in_order(dist2);
  res.seed_inertia = res.inertia;
  res.inertia_history = {res.inertia};
  res.sizes = {points.rows};
  return res;
}

CentroidSet make_centroid_set(const ToyGenerator& generator, const KMeansResult& clustering) {
  CentroidSet set;
  set.centers = clustering.centers;
  set.sizes = clustering.sizes;
  set.inertia = clustering.inertia;
  set.layers = generator.layout().layers;
  set.dim = generator.layout().w_dim;
  for (int i = 0; i < set.size(); ++i) set.center_images.push_back(generator.synthesis(set.latent(i)));
  return set;
}

CentroidSet build_centroids(const ToyGenerator& generator, ClassLabel c, const ClusterConfig& config) {
  const auto latents = sample_latents(generator, c, config.samples, config.seed);
  const auto points = stack_rows(latents);
  return make_centroid_set(generator, kmeans(points, config.clusters, config));
}

Selection select_centroid(const Image& degraded, const CentroidSet& centroids,
                          const FeatureExtractor& extractor, const DegradationSpec& spec,
                          bool degrade_centers) {
  if (centroids.size() == 0) throw ClusterError("centroid set is empty");
  const FeatureEmbedding target = extractor.embed(degraded);
  Selection sel;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < centroids.size(); ++i) {
    const Image& center = centroids.center_images[i];
    const double d = extractor.distance(
        target, extractor.embed(degrade_centers ? apply(spec, center) : center));
    sel.distances.push_back(d);
    if (d < best) {
      best = d;
      sel.index = i;
    }
  }
  sel.latent = centroids.latent(sel.index);
  return sel;
}

std::string centroid_key(std::uint64_t generator_seed, ClassLabel c, int samples, int clusters,
                         std::uint64_t seed) {
  return "g" + std::to_string(generator_seed) + "_c" + std::to_string(c.index) + "_m" +
         std::to_string(samples) + "_n" + std::to_string(clusters) + "_s" + std::to_string(seed);
}

void save_centroids(const std::filesystem::path& dir, const std::string& key, const CentroidSet& set) {
  std::filesystem::create_directories(dir);
  const auto bin = dir / (key + ".bin");
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw IoError("cannot write " + bin.string());
    for (double v : set.centers.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      unsigned char le[8];
      for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
      out.write(reinterpret_cast<const char*>(le), 8);
    }
  }
  nlohmann::json j;
  j["key"] = key;
  j["rows"] = set.centers.rows;
  j["cols"] = set.centers.cols;
  j["layers"] = set.layers;
  j["dim"] = set.dim;
  j["sizes"] = set.sizes;
  j["inertia"] = set.inertia;
  j["centers_file"] = bin.filename().string();
  j["encoding"] = "float64-le";
  std::ofstream(dir / (key + ".json")) << j.dump(2) << "\n";
}

CentroidSet load_centroids(const std::filesystem::path& dir, const std::string& key,
                           const ToyGenerator& generator) {
  std::ifstream in(dir / (key + ".json"));
  if (!in) throw IoError("no centroid manifest for key " + key);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad centroid manifest: " + std::string(e.what()));
  }
  if (j.at("key").get<std::string>() != key) throw IoError("centroid manifest key mismatch");
  CentroidSet set;
  set.centers.rows = j.at("rows").get<int>();
  set.centers.cols = j.at("cols").get<int>();
  set.layers = j.at("layers").get<int>();
  set.dim = j.at("dim").get<int>();
  set.sizes = j.at("sizes").get<std::vector<int>>();
  set.inertia = j.at("inertia").get<double>();
  if (set.layers != generator.layout().layers || set.dim != generator.layout().w_dim) {
    throw IoError("centroid set was built for a different generator layout");
  }
  std::ifstream bin(dir / j.at("centers_file").get<std::string>(), std::ios::binary);
  set.centers.data.resize(static_cast<std::size_t>(set.centers.rows) * set.centers.cols);
  for (double& v : set.centers.data) {
    unsigned char le[8];
    if (!bin.read(reinterpret_cast<char*>(le), 8)) throw IoError("centroid file truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(le[b]) << (8 * b);
    std::memcpy(&v, &bits, sizeof(v));
  }
  for (int i = 0; i < set.size(); ++i) set.center_images.push_back(generator.synthesis(set.latent(i)));
  return set;
}

}  // namespace cri
