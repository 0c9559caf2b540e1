#include "cri/perception.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cri/errors.hpp"
#include "cri/rng.hpp"

namespace cri {

namespace {

constexpr double kNormEps = 1e-10;

using kernels::FeatureMap;

FeatureMap avg_pool2(const FeatureMap& in) {
  FeatureMap out(in.channels, in.height / 2, in.width / 2);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                  in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
  return out;
}

void avg_pool2_adjoint(const FeatureMap& grad, FeatureMap& into) {
  for (int c = 0; c < grad.channels; ++c) {
    for (int y = 0; y < grad.height; ++y) {
      for (int x = 0; x < grad.width; ++x) {
        const double g = 0.25 * grad.at(c, y, x);
        into.at(c, 2 * y, 2 * x) += g;
        into.at(c, 2 * y, 2 * x + 1) += g;
        into.at(c, 2 * y + 1, 2 * x) += g;
        into.at(c, 2 * y + 1, 2 * x + 1) += g;
      }
    }
  }
}

struct Tap {
  int i0;
  int i1;
  double t;
};

std::vector<Tap> bilinear_taps(int in_size, int factor) {
  std::vector<Tap> taps(static_cast<std::size_t>(in_size) * factor);
  for (int o = 0; o < in_size * factor; ++o) {
    double s = (o + 0.5) / factor - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in_size - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

std::vector<double> FeatureEmbedding::pooled() const {
  std::vector<double> out;
  for (const auto& f : normalized) {
    const double inv = 1.0 / static_cast<double>(f.plane());
    for (int c = 0; c < f.channels; ++c) {
      double acc = 0.0;
      const double* p = f.data.data() + c * f.plane();
      for (std::size_t i = 0; i < f.plane(); ++i) acc += p[i];
      out.push_back(acc * inv);
    }
  }
  return out;
}

FeatureExtractor::FeatureExtractor(ExtractorConfig config) : config_(config) {
  if (config_.scales < 1 || config_.channels < 1) {
    throw ConfigError("perception", "extractor needs at least one scale and one channel");
  }
  if (config_.base_resolution % (1 << (config_.scales - 1)) != 0) {
    throw ConfigError("perception.scales", "base resolution not divisible by the pyramid depth");
  }
  Engine rng = make_engine(config_.seed, Stream::ExtractorWeights);
  int cin = 3;
  for (int s = 0; s < config_.scales; ++s) {
    const double std = 1.0 / std::sqrt(cin * 9.0);
    weights_.push_back(normal_vector(rng, static_cast<std::size_t>(config_.channels) * cin * 9, std));
    biases_.push_back(normal_vector(rng, config_.channels, 0.2));
    cin = config_.channels;
  }
}

FeatureExtractor::FeatureExtractor(ExtractorConfig config, std::vector<std::vector<double>> weights,
                                   std::vector<std::vector<double>> biases)
    : config_(config), weights_(std::move(weights)), biases_(std::move(biases)) {}

void FeatureExtractor::save(const std::filesystem::path& manifest) const {
  auto bin_path = manifest;
  bin_path.replace_extension(".bin");
  nlohmann::json j;
  j["weights_file"] = bin_path.filename().string();
  j["base_resolution"] = config_.base_resolution;
  j["seed"] = config_.seed;
  nlohmann::json blocks = nlohmann::json::array();
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bin_path.string());
  auto put = [&](const std::vector<double>& values) {
    for (double v : values) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof(bits));
      const unsigned char le[4] = {static_cast<unsigned char>(bits & 0xff),
                                   static_cast<unsigned char>((bits >> 8) & 0xff),
                                   static_cast<unsigned char>((bits >> 16) & 0xff),
                                   static_cast<unsigned char>((bits >> 24) & 0xff)};
      bin.write(reinterpret_cast<const char*>(le), 4);
    }
  };
  int cin = 3;
  for (int s = 0; s < config_.scales; ++s) {
    blocks.push_back({{"name", "stage" + std::to_string(s) + ".weight"},
                      {"shape", {config_.channels, cin, 3, 3}}});
    blocks.push_back({{"name", "stage" + std::to_string(s) + ".bias"}, {"shape", {config_.channels}}});
    put(weights_[s]);
    put(biases_[s]);
    cin = config_.channels;
  }
  j["blocks"] = blocks;
  std::ofstream(manifest) << j.dump(2) << "\n";
}

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open extractor manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad extractor manifest: " + std::string(e.what()));
  }
  const auto bin_path = manifest.parent_path() / j.at("weights_file").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open extractor weights " + bin_path.string());
  auto take = [&](std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) {
      unsigned char le[4];
      if (!bin.read(reinterpret_cast<char*>(le), 4)) throw IoError("extractor weight file truncated");
      const std::uint32_t bits = le[0] | (le[1] << 8) | (le[2] << 16) |
                                 (static_cast<std::uint32_t>(le[3]) << 24);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      v = f;
    }
    return out;
  };
  ExtractorConfig cfg;
  cfg.base_resolution = j.at("base_resolution").get<int>();
  cfg.seed = j.value("seed", std::uint64_t{0});
  const auto& blocks = j.at("blocks");
  if (blocks.size() % 2 != 0 || blocks.empty()) throw IoError("extractor manifest needs weight/bias pairs");
  cfg.scales = static_cast<int>(blocks.size() / 2);
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  int cin = 3;
  for (int s = 0; s < cfg.scales; ++s) {
    const auto ws = blocks[2 * s].at("shape").get<std::vector<int>>();
    const auto bs = blocks[2 * s + 1].at("shape").get<std::vector<int>>();
    if (ws.size() != 4 || ws[1] != cin || ws[2] != 3 || ws[3] != 3 || bs.size() != 1 || bs[0] != ws[0]) {
      throw IoError("extractor stage " + std::to_string(s) + " has an unsupported shape");
    }
    if (s == 0) cfg.channels = ws[0];
    if (ws[0] != cfg.channels) throw IoError("extractor stages must share a channel count");
    weights.push_back(take(static_cast<std::size_t>(ws[0]) * ws[1] * 9));
    biases.push_back(take(bs[0]));
    cin = ws[0];
  }
  return FeatureExtractor(cfg, std::move(weights), std::move(biases));
}

void FeatureExtractor::check_input(const Image& image) const {
  const int base = config_.base_resolution;
  if (image.height != image.width || image.height <= 0 || base % image.height != 0) {
    throw ShapeMismatchError("extractor expects a square image whose side divides " +
                             std::to_string(base));
  }
}

Image FeatureExtractor::prepare(const Image& image) const {
  check_input(image);
  if (image.height == config_.base_resolution) return image;
  return upsample_bilinear(image, config_.base_resolution / image.height);
}

FeatureEmbedding FeatureExtractor::embed(const Image& image) const {
  return embed_prepared(prepare(image));
}

FeatureEmbedding FeatureExtractor::embed_prepared(const Image& image) const {
  FeatureEmbedding e;
  FeatureMap x(3, image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int xx = 0; xx < image.width; ++xx) {
      for (int c = 0; c < 3; ++c) x.at(c, y, xx) = (image.at(y, xx, c) - input_mean_[c]) / input_std_[c];
    }
  }
  for (int s = 0; s < config_.scales; ++s) {
    if (s > 0) x = avg_pool2(e.activations.back());
    FeatureMap a(config_.channels, x.height, x.width);
    kernels::omp::conv3x3(x, weights_[s], biases_[s], a);
    for (double& v : a.data) v = std::tanh(v);

    FeatureMap n(a.channels, a.height, a.width);
    std::vector<double> norms(a.plane());
    for (std::size_t p = 0; p < a.plane(); ++p) {
      double ss = kNormEps;
      for (int c = 0; c < a.channels; ++c) ss += a.data[c * a.plane() + p] * a.data[c * a.plane() + p];
      const double len = std::sqrt(ss);
      norms[p] = len;
      for (int c = 0; c < a.channels; ++c) n.data[c * a.plane() + p] = a.data[c * a.plane() + p] / len;
    }
    e.activations.push_back(std::move(a));
    e.normalized.push_back(std::move(n));
    e.norms.push_back(std::move(norms));
  }
  return e;
}

double FeatureExtractor::distance(const FeatureEmbedding& a, const FeatureEmbedding& b) const {
  if (a.normalized.size() != b.normalized.size()) throw ShapeMismatchError("embedding depth mismatch");
  double total = 0.0;
  for (std::size_t s = 0; s < a.normalized.size(); ++s) {
    const auto& fa = a.normalized[s];
    const auto& fb = b.normalized[s];
    if (fa.data.size() != fb.data.size()) throw ShapeMismatchError("embedding shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < fa.data.size(); ++i) {
      const double d = fa.data[i] - fb.data[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(fa.plane());
  }
  return total;
}

double FeatureExtractor::distance(const Image& x, const Image& y) const {
  if (!x.same_shape(y)) throw ShapeMismatchError("perceptual distance needs equal shapes");
  return distance(embed(x), embed(y));
}

double FeatureExtractor::distance_with_grad(const FeatureEmbedding& target, const Image& x,
                                            Image& grad_x) const {
  const Image prepared = prepare(x);
  const FeatureEmbedding e = embed_prepared(prepared);
  const double value = distance(target, e);

  const int S = config_.scales;
  FeatureMap carry;  // gradient w.r.t. the input of the stage above
  for (int s = S - 1; s >= 0; --s) {
    const auto& a = e.activations[s];
    const auto& n = e.normalized[s];
    const auto& t = target.normalized[s];
    const std::size_t P = a.plane();
    const double scale = 2.0 / static_cast<double>(P);
    FeatureMap da(a.channels, a.height, a.width);
    for (std::size_t p = 0; p < P; ++p) {
      // g = dL/dn at this position; da = g/len - n (n . g)/len
      double dot = 0.0;
      for (int c = 0; c < a.channels; ++c) {
        const std::size_t i = c * P + p;
        dot += n.data[i] * scale * (n.data[i] - t.data[i]);
      }
      const double len = e.norms[s][p];
      for (int c = 0; c < a.channels; ++c) {
        const std::size_t i = c * P + p;
        const double g = scale * (n.data[i] - t.data[i]);
        da.data[i] = (g - n.data[i] * dot) / len;
      }
    }
    if (s < S - 1) avg_pool2_adjoint(carry, da);
    for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= 1.0 - a.data[i] * a.data[i];
    FeatureMap dx(s == 0 ? 3 : config_.channels, a.height, a.width);
    kernels::omp::conv3x3_backward_input(da, weights_[s], dx);
    carry = std::move(dx);
  }

  Image g(prepared.height, prepared.width);
  for (int y = 0; y < g.height; ++y) {
    for (int xx = 0; xx < g.width; ++xx) {
      for (int c = 0; c < 3; ++c) g.at(y, xx, c) = carry.at(c, y, xx) / input_std_[c];
    }
  }
  grad_x = x.height == prepared.height ? std::move(g)
                                       : upsample_bilinear_adjoint(g, prepared.height / x.height);
  return value;
}

Image upsample_bilinear(const Image& image, int factor) {
  if (factor == 1) return image;
  const auto ty = bilinear_taps(image.height, factor);
  const auto tx = bilinear_taps(image.width, factor);
  Image out(image.height * factor, image.width * factor);
  for (int y = 0; y < out.height; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < out.width; ++x) {
      const Tap& b = tx[x];
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = (1 - a.t) * ((1 - b.t) * image.at(a.i0, b.i0, c) + b.t * image.at(a.i0, b.i1, c)) +
                          a.t * ((1 - b.t) * image.at(a.i1, b.i0, c) + b.t * image.at(a.i1, b.i1, c));
      }
    }
  }
  return out;
}

Image upsample_bilinear_adjoint(const Image& grad, int factor) {
  if (factor == 1) return grad;
  const int h = grad.height / factor;
  const int w = grad.width / factor;
  const auto ty = bilinear_taps(h, factor);
  const auto tx = bilinear_taps(w, factor);
  Image out(h, w);
  for (int y = 0; y < grad.height; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < grad.width; ++x) {
      const Tap& b = tx[x];
      for (int c = 0; c < 3; ++c) {
        const double g = grad.at(y, x, c);
        out.at(a.i0, b.i0, c) += (1 - a.t) * (1 - b.t) * g;
        out.at(a.i0, b.i1, c) += (1 - a.t) * b.t * g;
        out.at(a.i1, b.i0, c) += a.t * (1 - b.t) * g;
        out.at(a.i1, b.i1, c) += a.t * b.t * g;
      }
    }
  }
  return out;
}

double pixel_l2(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw ShapeMismatchError("pixel_l2 needs equal shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

Image pixel_l2_grad(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw ShapeMismatchError("pixel_l2 needs equal shapes");
  Image g(x.height, x.width);
  const double scale = 2.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g.data[i] = scale * (x.data[i] - y.data[i]);
  return g;
}

double psnr_from_mse(double mse) {
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const Image& x, const Image& y) { return psnr_from_mse(pixel_l2(x, y)); }

double frechet_distance(std::span<const double> mu1, std::span<const double> cov1,
                        std::span<const double> mu2, std::span<const double> cov2) {
  const auto n = static_cast<Eigen::Index>(mu1.size());
  if (mu2.size() != mu1.size() || cov1.size() != mu1.size() * mu1.size() || cov2.size() != cov1.size()) {
    throw ShapeMismatchError("frechet_distance dimension mismatch");
  }
  using Mat = Eigen::MatrixXd;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c1(cov1.data(), n, n);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c2(cov2.data(), n, n);
  const Mat s1 = 0.5 * (c1 + c1.transpose());
  const Mat s2 = 0.5 * (c2 + c2.transpose());

  Eigen::SelfAdjointEigenSolver<Mat> e1(s1);
  Eigen::SelfAdjointEigenSolver<Mat> e2(s2);
  if (e1.eigenvalues().minCoeff() < -1e-8 || e2.eigenvalues().minCoeff() < -1e-8) {
    throw NotPsdError("covariance is not positive semidefinite");
  }
  const Eigen::VectorXd root = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat sqrt1 = e1.eigenvectors() * root.asDiagonal() * e1.eigenvectors().transpose();
  Mat prod = sqrt1 * s2 * sqrt1;
  prod = 0.5 * (prod + prod.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> ep(prod, Eigen::EigenvaluesOnly);
  const double tr_sqrt = ep.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double mean_term = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = mu1[i] - mu2[i];
    mean_term += d * d;
  }
  return std::max(0.0, mean_term + s1.trace() + s2.trace() - 2.0 * tr_sqrt);
}

GaussianStats gaussian_stats(std::span<const std::vector<double>> vectors) {
  GaussianStats st;
  if (vectors.empty()) return st;
  const std::size_t d = vectors.front().size();
  st.mean.assign(d, 0.0);
  st.cov.assign(d * d, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != d) throw ShapeMismatchError("embedding dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) st.mean[i] += v[i];
  }
  for (double& m : st.mean) m /= static_cast<double>(vectors.size());
  if (vectors.size() < 2) return st;
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = v[i] - st.mean[i];
      for (std::size_t j = 0; j < d; ++j) st.cov[i * d + j] += di * (v[j] - st.mean[j]);
    }
  }
  const double inv = 1.0 / static_cast<double>(vectors.size() - 1);
  for (double& c : st.cov) c *= inv;
  return st;
}

GaussianStats embed_set(const FeatureExtractor& extractor, std::span<const Image> images) {
  std::vector<std::vector<double>> vecs;
  vecs.reserve(images.size());
  for (const auto& img : images) vecs.push_back(extractor.embed(img).pooled());
  return gaussian_stats(vecs);
}

}  // namespace cri
