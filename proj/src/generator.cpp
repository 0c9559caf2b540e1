#include "cri/generator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cri/errors.hpp"

namespace cri {

namespace {

// Spread of the nonlinear mapping term and distance of each mode offset from
// the class base point. With d_w = 32 the nonlinear term has an RMS radius of
// roughly 0.35 while distinct modes sit 3.6 * sqrt(2) apart.
constexpr double kIntraScale = 0.1;
constexpr double kModeRadius = 3.6;
constexpr double kClassEmbedScale = 0.5;

constexpr double kPositionGain = 1.5;
constexpr double kSigmaGain = 0.3;
constexpr double kColorGain = 1.5;
constexpr double kAmpGain = 1.0;
constexpr double kBaseSigma = 0.12;

// Orthonormal rows (count x dim) via Gram-Schmidt on Gaussian draws.
std::vector<double> orthonormal_rows(Engine& engine, int count, int dim) {
  std::vector<double> rows;
  rows.reserve(static_cast<std::size_t>(count) * dim);
  while (static_cast<int>(rows.size()) < count * dim) {
    auto v = normal_vector(engine, dim);
    const int have = static_cast<int>(rows.size()) / dim;
    for (int r = 0; r < have; ++r) {
      double dot = 0.0;
      for (int i = 0; i < dim; ++i) dot += v[i] * rows[r * dim + i];
      for (int i = 0; i < dim; ++i) v[i] -= dot * rows[r * dim + i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (double x : v) rows.push_back(x / n);
  }
  return rows;
}

}  // namespace

ToyGenerator::ToyGenerator(std::uint64_t seed, GeneratorLayout layout)
    : layout_(layout), seed_(seed) {
  if (layout_.modes > layout_.z_dim || layout_.modes > layout_.w_dim || layout_.modes < 1) {
    throw ConfigError("generator.modes", "mode count must be in [1, min(z_dim, w_dim)]");
  }
  const int H = layout_.hidden;
  const int Z = layout_.z_dim;
  const int D = layout_.w_dim;
  const int C = layout_.classes;
  const int K = layout_.modes;

  Engine mapping_rng = make_engine(seed, Stream::GeneratorWeights, 0);
  a1_ = normal_vector(mapping_rng, static_cast<std::size_t>(H) * Z, 1.0 / std::sqrt(Z));
  b1_ = normal_vector(mapping_rng, H, 0.1);
  a2_ = normal_vector(mapping_rng, static_cast<std::size_t>(D) * H, kIntraScale / std::sqrt(H));
  b2_ = normal_vector(mapping_rng, D, 0.1);
  class_embed_ = normal_vector(mapping_rng, static_cast<std::size_t>(C) * D, kClassEmbedScale);
  for (int c = 0; c < C; ++c) {
    auto offsets = orthonormal_rows(mapping_rng, K, D);
    for (double& v : offsets) v *= kModeRadius;
    mode_offsets_.insert(mode_offsets_.end(), offsets.begin(), offsets.end());
    auto dirs = orthonormal_rows(mapping_rng, K, Z);
    mode_dirs_.insert(mode_dirs_.end(), dirs.begin(), dirs.end());
  }

  Engine synth_rng = make_engine(seed, Stream::GeneratorWeights, 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double inv_sqrt_d = 1.0 / std::sqrt(D);
  for (int l = 0; l < layout_.layers; ++l) {
    std::vector<double> weight(static_cast<std::size_t>(kReadoutSize) * D);
    std::vector<double> bias(kReadoutSize);
    const double gains[kReadoutSize] = {kPositionGain, kPositionGain, kSigmaGain, kColorGain,
                                        kColorGain,    kColorGain,    kAmpGain};
    for (int r = 0; r < kReadoutSize; ++r) {
      for (int i = 0; i < D; ++i) weight[r * D + i] = gains[r] * inv_sqrt_d * unit(synth_rng);
    }
    bias[kCx] = 0.7 * unit(synth_rng);
    bias[kCy] = 0.7 * unit(synth_rng);
    bias[kLogSigma] = std::log(kBaseSigma) + 0.15 * unit(synth_rng);
    for (int c = kRed; c <= kBlue; ++c) bias[c] = 1.2 * unit(synth_rng);
    const double sign = unit(synth_rng) < 0.0 ? -1.0 : 1.0;
    bias[kAmp] = sign * (2.0 + 0.5 * std::abs(unit(synth_rng)));
    const std::string prefix = "layer" + std::to_string(l) + ".readout.";
    params_.add_block(prefix + "weight", {kReadoutSize, D}, weight);
    params_.add_block(prefix + "bias", {kReadoutSize}, bias);
  }
  std::vector<double> pixel_bias = normal_vector(synth_rng, 3, 0.3);
  params_.add_block("pixel.bias", {3}, pixel_bias);
}

void ToyGenerator::check_class(ClassLabel c) const {
  if (c.index < 0 || c.index >= layout_.classes) {
    throw InvalidClassError("class index " + std::to_string(c.index) + " outside [0, " +
                            std::to_string(layout_.classes) + ")");
  }
}

void ToyGenerator::check_latent(const LatentW& w) const {
  if (w.layers() != layout_.layers || w.dim() != layout_.w_dim) {
    throw InvalidLatentError("latent layout does not match generator");
  }
  if (!w.all_finite()) throw InvalidLatentError("latent has non-finite entries");
}

LatentZ ToyGenerator::sample_z(Engine& engine) const {
  return LatentZ{normal_vector(engine, layout_.z_dim)};
}

int ToyGenerator::mode_index(const LatentZ& z, ClassLabel c) const {
  check_class(c);
  const int Z = layout_.z_dim;
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < layout_.modes; ++k) {
    const double* u = mode_dirs_.data() + (static_cast<std::size_t>(c.index) * layout_.modes + k) * Z;
    double dot = 0.0;
    for (int i = 0; i < Z; ++i) dot += z.values[i] * u[i];
    if (dot > best_dot) {
      best_dot = dot;
      best = k;
    }
  }
  return best;
}

std::vector<double> ToyGenerator::map_row(const LatentZ& z, ClassLabel c) const {
  check_class(c);
  if (static_cast<int>(z.values.size()) != layout_.z_dim) {
    throw InvalidLatentError("z has wrong dimension");
  }
  for (double v : z.values) {
    if (!std::isfinite(v)) throw InvalidLatentError("z has non-finite entries");
  }
  const int H = layout_.hidden;
  const int Z = layout_.z_dim;
  const int D = layout_.w_dim;
  std::vector<double> h(H);
  for (int j = 0; j < H; ++j) {
    double acc = b1_[j];
    for (int i = 0; i < Z; ++i) acc += a1_[j * Z + i] * z.values[i];
    h[j] = std::tanh(acc);
  }
  const int k = mode_index(z, c);
  const double* mu = mode_offsets_.data() + (static_cast<std::size_t>(c.index) * layout_.modes + k) * D;
  const double* e = class_embed_.data() + static_cast<std::size_t>(c.index) * D;
  std::vector<double> w(D);
  for (int d = 0; d < D; ++d) {
    double acc = b2_[d];
    for (int j = 0; j < H; ++j) acc += a2_[d * H + j] * h[j];
    w[d] = acc + e[d] + mu[d];
  }
  return w;
}

LatentW ToyGenerator::mapping(const LatentZ& z, ClassLabel c) const {
  return LatentW::broadcast(map_row(z, c), layout_.layers);
}

std::vector<double> ToyGenerator::mode_offset(ClassLabel c, int k) const {
  check_class(c);
  const int D = layout_.w_dim;
  const double* mu = mode_offsets_.data() + (static_cast<std::size_t>(c.index) * layout_.modes + k) * D;
  return {mu, mu + D};
}

std::vector<double> ToyGenerator::mode_anchor(ClassLabel c, int k) const {
  check_class(c);
  const int H = layout_.hidden;
  const int D = layout_.w_dim;
  auto out = mode_offset(c, k);
  const double* e = class_embed_.data() + static_cast<std::size_t>(c.index) * D;
  for (int d = 0; d < D; ++d) {
    double acc = b2_[d];
    for (int j = 0; j < H; ++j) acc += a2_[d * H + j] * std::tanh(b1_[j]);
    out[d] += acc + e[d];
  }
  return out;
}

void ToyGenerator::restore(const GeneratorParams& snapshot) {
  if (!snapshot.same_layout(params_) || snapshot.values().size() != params_.values().size()) {
    throw CorruptSnapshotError("snapshot layout does not match generator parameters");
  }
  params_ = snapshot;
}

SynthesisTape ToyGenerator::forward(const LatentW& w, const GeneratorParams& params) const {
  check_latent(w);
  if (!params.same_layout(params_)) throw CorruptSnapshotError("parameter layout mismatch");
  const int L = layout_.layers;
  const int D = layout_.w_dim;
  SynthesisTape tape;
  tape.readout.resize(static_cast<std::size_t>(L) * kReadoutSize);
  tape.blobs.resize(L);
  for (int l = 0; l < L; ++l) {
    const std::size_t base = params.layout()[2 * l].offset;
    const double* weight = params.values().data() + base;
    const double* bias = params.values().data() + params.layout()[2 * l + 1].offset;
    auto row = w.row(l);
    double* a = tape.readout.data() + static_cast<std::size_t>(l) * kReadoutSize;
    for (int r = 0; r < kReadoutSize; ++r) {
      double acc = bias[r];
      for (int i = 0; i < D; ++i) acc += weight[r * D + i] * row[i];
      a[r] = acc;
    }
    kernels::Blob& b = tape.blobs[l];
    b.cx = kernels::logistic(a[kCx]);
    b.cy = kernels::logistic(a[kCy]);
    b.sigma = std::exp(a[kLogSigma]);
    for (int c = 0; c < 3; ++c) b.color[c] = kernels::logistic(a[kRed + c]);
    b.amp = a[kAmp];
  }
  auto pb = params.block("pixel.bias");
  tape.image = Image(layout_.resolution, layout_.resolution);
  kernels::omp::render(tape.blobs, {pb[0], pb[1], pb[2]}, tape.image);
  return tape;
}

Image ToyGenerator::synthesis(const LatentW& w, const GeneratorParams& params) const {
  return forward(w, params).image;
}

void ToyGenerator::backward(const LatentW& w, const GeneratorParams& params,
                            const SynthesisTape& tape, const Image& grad_image, LatentW* grad_w,
                            GeneratorParams* grad_params) const {
  if (!grad_image.same_shape(tape.image)) throw ShapeMismatchError("image gradient shape mismatch");
  kernels::RenderGrad rg;
  kernels::omp::render_backward(tape.blobs, tape.image, grad_image, rg);

  const int L = layout_.layers;
  const int D = layout_.w_dim;
  if (grad_w) *grad_w = LatentW(L, D);
  if (grad_params) *grad_params = params.zeros_like();

  for (int l = 0; l < L; ++l) {
    const kernels::Blob& b = tape.blobs[l];
    const double* g = rg.blobs.data() + static_cast<std::size_t>(l) * kernels::kBlobGradSize;
    double da[kReadoutSize];
    da[kCx] = g[0] * b.cx * (1.0 - b.cx);
    da[kCy] = g[1] * b.cy * (1.0 - b.cy);
    da[kLogSigma] = g[2] * b.sigma;
    for (int c = 0; c < 3; ++c) da[kRed + c] = g[3 + c] * b.color[c] * (1.0 - b.color[c]);
    da[kAmp] = g[6];

    const double* weight = params.values().data() + params.layout()[2 * l].offset;
    auto row = w.row(l);
    if (grad_w) {
      auto gw = grad_w->row(l);
      for (int r = 0; r < kReadoutSize; ++r) {
        for (int i = 0; i < D; ++i) gw[i] += weight[r * D + i] * da[r];
      }
    }
    if (grad_params) {
      double* gweight = grad_params->values().data() + params.layout()[2 * l].offset;
      double* gbias = grad_params->values().data() + params.layout()[2 * l + 1].offset;
      for (int r = 0; r < kReadoutSize; ++r) {
        for (int i = 0; i < D; ++i) gweight[r * D + i] = da[r] * row[i];
        gbias[r] = da[r];
      }
    }
  }
  if (grad_params) {
    auto gb = grad_params->block("pixel.bias");
    for (int c = 0; c < 3; ++c) gb[c] = rg.bias[c];
  }
}

}  // namespace cri
