#include "cri/invert.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "cri/adam.hpp"

namespace cri {

namespace {

// Packs a latent into the optimizer's parameter vector: every row for W+,
// one shared row for W.
struct LatentPacking {
  LatentSpace space;
  int layers;
  int dim;

  std::vector<double> pack(const LatentW& w) const {
    if (space == LatentSpace::WPlus) return w.values();
    auto r = w.row(0);
    return {r.begin(), r.end()};
  }

  LatentW unpack(const std::vector<double>& p) const {
    if (space == LatentSpace::W) return LatentW::broadcast(p, layers);
    LatentW w(layers, dim);
    w.values() = p;
    return w;
  }

  std::vector<double> reduce(const LatentW& g) const {
    if (space == LatentSpace::WPlus) return g.values();
    std::vector<double> out(dim, 0.0);
    for (int l = 0; l < layers; ++l) {
      auto r = g.row(l);
      for (int i = 0; i < dim; ++i) out[i] += r[i];
    }
    return out;
  }
};

bool diverged(const LossTerms& t) { return !std::isfinite(t.total) || t.total > kDivergenceLimit; }

using LatentEval = std::function<LossTerms(const LatentW&, LatentW*)>;

LatentRun run_latent_adam(const LatentEval& eval, const LatentW& start, int iters, double lr,
                          LatentSpace space, const char* stage) {
  if (space == LatentSpace::W && !start.is_w_space()) {
    throw InvalidLatentError("W-space optimization needs a W-space starting point");
  }
  const LatentPacking packing{space, start.layers(), start.dim()};
  std::vector<double> params = packing.pack(start);
  Adam adam(params.size(), lr);
  LatentRun run;
  for (int t = 0; t <= iters; ++t) {
    LatentW current = packing.unpack(params);
    LatentW grad;
    const LossTerms terms = eval(current, t < iters ? &grad : nullptr);
    run.trajectory.push_back(terms);
    if (diverged(terms)) throw DivergenceError(stage, t, run.trajectory);
    if (t == 0 || terms.total < run.best.total) {
      run.best = terms;
      run.best_iteration = t;
      run.latent = std::move(current);
    }
    if (t == iters) break;
    const auto g = packing.reduce(grad);
    adam.step(params, g);
  }
  return run;
}

}  // namespace

ReconstructionLoss::ReconstructionLoss(const FeatureExtractor& extractor, DegradationSpec spec,
                                       const Image& degraded)
    : extractor_(&extractor),
      spec_(std::move(spec)),
      degraded_(degraded),
      target_(extractor.embed(degraded)) {}

LossTerms ReconstructionLoss::evaluate(const Image& image, double pixel_weight, Image* grad_image) const {
  const Image d = apply(spec_, image);
  if (!d.same_shape(degraded_)) throw ShapeMismatchError("degraded synthesis does not match observation");
  LossTerms terms;
  Image grad_d;
  if (grad_image) {
    terms.perceptual = extractor_->distance_with_grad(target_, d, grad_d);
    const Image gp = pixel_l2_grad(d, degraded_);
    for (std::size_t i = 0; i < grad_d.size(); ++i) grad_d.data[i] += pixel_weight * gp.data[i];
    *grad_image = apply_adjoint(spec_, grad_d, image.height, image.width);
  } else {
    terms.perceptual = extractor_->distance(target_, extractor_->embed(d));
  }
  terms.pixel = pixel_l2(d, degraded_);
  terms.total = terms.perceptual + pixel_weight * terms.pixel;
  return terms;
}

OffsetObjective::OffsetObjective(const ToyGenerator& generator, const FeatureExtractor& extractor,
                                 const DegradationSpec& spec, const Image& degraded, LatentW centroid,
                                 LossWeights weights)
    : generator_(&generator),
      recon_(extractor, spec, degraded),
      centroid_(std::move(centroid)),
      weights_(weights) {
  spec.validate(generator.layout().resolution, generator.layout().resolution);
}

LossTerms OffsetObjective::evaluate_latent(const LatentW& w, LatentW* grad_w) const {
  const GeneratorParams& params = generator_->params();
  const SynthesisTape tape = generator_->forward(w, params);
  Image grad_image;
  LossTerms terms = recon_.evaluate(tape.image, weights_.lambda1, grad_w ? &grad_image : nullptr);
  if (grad_w) generator_->backward(w, params, tape, grad_image, grad_w, nullptr);
  return terms;
}

LossTerms OffsetObjective::evaluate(const LatentW& offset, LatentW* grad_offset) const {
  const LatentW w = centroid_ + offset;
  LossTerms terms = evaluate_latent(w, grad_offset);

  const auto& x = offset.values();
  double reg = 0.0;
  if (weights_.offset_norm == OffsetNorm::L2) {
    double ss = kNormSmoothing;
    for (double v : x) ss += v * v;
    reg = std::sqrt(ss);
    if (grad_offset) {
      auto& g = grad_offset->values();
      for (std::size_t i = 0; i < x.size(); ++i) g[i] += weights_.lambda2 * x[i] / reg;
    }
  } else {
    for (double v : x) reg += std::sqrt(v * v + kNormSmoothing);
    if (grad_offset) {
      auto& g = grad_offset->values();
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] += weights_.lambda2 * x[i] / std::sqrt(x[i] * x[i] + kNormSmoothing);
      }
    }
  }
  terms.regularizer = reg;
  terms.total += weights_.lambda2 * reg;
  return terms;
}

LossTerms stage1_loss(const ToyGenerator& generator, const FeatureExtractor& extractor,
                      const Image& degraded, const LatentW& centroid, const LatentW& offset,
                      const DegradationSpec& spec, const LossWeights& weights, LatentW* grad_offset) {
  return OffsetObjective(generator, extractor, spec, degraded, centroid, weights)
      .evaluate(offset, grad_offset);
}

LatentRun optimize_offset(const OffsetObjective& objective, const StageSchedule& schedule) {
  const LatentW& c = objective.centroid();
  return run_latent_adam(
      [&](const LatentW& off, LatentW* g) { return objective.evaluate(off, g); },
      LatentW(c.layers(), c.dim()), schedule.stage1_iters, schedule.stage1_lr, schedule.space,
      "stage 1");
}

LatentRun optimize_latent(const OffsetObjective& objective, const LatentW& start,
                          const StageSchedule& schedule) {
  return run_latent_adam(
      [&](const LatentW& w, LatentW* g) { return objective.evaluate_latent(w, g); }, start,
      schedule.stage1_iters, schedule.stage1_lr, schedule.space, "stage 1");
}

LatentW interpolate_code(const LatentW& pivot, const LatentW& w_rand, double alpha) {
  LatentW dir = w_rand - pivot;
  const double n = dir.norm();
  if (n == 0.0 || alpha == 0.0) return pivot;
  dir *= alpha / n;
  return pivot + dir;
}

LatentW locality_code(const ToyGenerator& generator, const LatentW& pivot, ClassLabel c,
                      double alpha, std::uint64_t seed, std::uint64_t counter) {
  Engine engine = make_engine(seed, Stream::LocalitySamples, counter);
  const LatentZ z = generator.sample_z(engine);
  return interpolate_code(pivot, generator.mapping(z, c), alpha);
}

FinetuneObjective::FinetuneObjective(const ToyGenerator& generator, const FeatureExtractor& extractor,
                                     const DegradationSpec& spec, const Image& degraded, LatentW pivot,
                                     GeneratorParams original, LossWeights weights)
    : generator_(&generator),
      extractor_(&extractor),
      recon_(extractor, spec, degraded),
      pivot_(std::move(pivot)),
      original_(std::move(original)),
      weights_(weights) {}

double FinetuneObjective::locality(const GeneratorParams& theta, const LatentW& code,
                                   GeneratorParams* grad) const {
  const Image reference = generator_->synthesis(code, original_);
  const SynthesisTape tape = generator_->forward(code, theta);
  const FeatureEmbedding target = extractor_->embed(reference);
  Image g;
  const double perceptual = extractor_->distance_with_grad(target, tape.image, g);
  const double pixel = pixel_l2(tape.image, reference);
  if (grad) {
    const Image gp = pixel_l2_grad(tape.image, reference);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += weights_.lambda_l2_r * gp.data[i];
    generator_->backward(code, theta, tape, g, nullptr, grad);
  }
  return perceptual + weights_.lambda_l2_r * pixel;
}

LossTerms FinetuneObjective::evaluate(const GeneratorParams& theta, const LatentW& code,
                                      GeneratorParams* grad) const {
  const SynthesisTape tape = generator_->forward(pivot_, theta);
  Image grad_image;
  LossTerms terms = recon_.evaluate(tape.image, weights_.lambda_l2, grad ? &grad_image : nullptr);
  if (grad) generator_->backward(pivot_, theta, tape, grad_image, nullptr, grad);
  if (weights_.lambda_r != 0.0) {
    GeneratorParams glr;
    terms.regularizer = locality(theta, code, grad ? &glr : nullptr);
    terms.total += weights_.lambda_r * terms.regularizer;
    if (grad) {
      auto& g = grad->values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += weights_.lambda_r * glr.values()[i];
    }
  }
  return terms;
}

double locality_term(const ToyGenerator& generator, const FeatureExtractor& extractor,
                     const GeneratorParams& theta, const GeneratorParams& theta_star,
                     const LatentW& pivot, ClassLabel c, double alpha, std::uint64_t seed,
                     std::uint64_t counter, double lambda_l2_r) {
  const LatentW code = locality_code(generator, pivot, c, alpha, seed, counter);
  const Image x = generator.synthesis(code, theta);
  const Image x_star = generator.synthesis(code, theta_star);
  return extractor.distance(x, x_star) + lambda_l2_r * pixel_l2(x, x_star);
}

FinetuneRun finetune_generator(const FinetuneObjective& objective, const StageSchedule& schedule,
                               ClassLabel c, double alpha, std::uint64_t seed) {
  FinetuneRun run;
  GeneratorParams theta = objective.original();
  Adam adam(theta.size(), schedule.stage2_lr);
  const int iters = schedule.stage2_iters;
  LossTerms best;
  for (int t = 0; t <= iters; ++t) {
    const LatentW code = locality_code(objective.generator(), objective.pivot(), c, alpha, seed,
                                       static_cast<std::uint64_t>(t));
    GeneratorParams grad;
    const LossTerms terms = objective.evaluate(theta, code, t < iters ? &grad : nullptr);
    run.trajectory.push_back(terms);
    if (diverged(terms)) throw DivergenceError("stage 2", t, run.trajectory);
    if (t == 0 || terms.total < best.total) {
      best = terms;
      run.best_iteration = t;
      run.params = theta;
    }
    if (t == iters) break;
    adam.step(theta.values(), grad.values());
  }
  return run;
}

double median_pairwise_distance(const ToyGenerator& generator, ClassLabel c, int count,
                                std::uint64_t seed) {
  const auto latents = sample_latents(generator, c, count, seed);
  std::vector<double> d;
  d.reserve(latents.size() * (latents.size() - 1) / 2);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    for (std::size_t j = i + 1; j < latents.size(); ++j) d.push_back((latents[i] - latents[j]).norm());
  }
  if (d.empty()) return 0.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

namespace {

struct JointRun {
  LatentW latent;
  GeneratorParams params;
  Trajectory trajectory;
  int best_iteration = 0;
};

// Latent and generator updated together on the reconstruction loss.
JointRun optimize_joint(const ToyGenerator& generator, const FeatureExtractor& extractor,
                        const DegradationSpec& spec, const Image& degraded, const LatentW& start,
                        const LossWeights& weights, const StageSchedule& schedule) {
  const ReconstructionLoss recon(extractor, spec, degraded);
  const LatentPacking packing{schedule.space, start.layers(), start.dim()};
  std::vector<double> latent = packing.pack(start);
  GeneratorParams theta = generator.snapshot();
  Adam latent_opt(latent.size(), schedule.stage1_lr);
  Adam param_opt(theta.size(), schedule.stage2_lr);
  const int iters = schedule.stage1_iters + schedule.stage2_iters;
  JointRun run;
  LossTerms best;
  for (int t = 0; t <= iters; ++t) {
    const LatentW w = packing.unpack(latent);
    const SynthesisTape tape = generator.forward(w, theta);
    Image grad_image;
    const LossTerms terms = recon.evaluate(tape.image, weights.lambda1, t < iters ? &grad_image : nullptr);
    run.trajectory.push_back(terms);
    if (diverged(terms)) throw DivergenceError("joint", t, run.trajectory);
    if (t == 0 || terms.total < best.total) {
      best = terms;
      run.best_iteration = t;
      run.latent = w;
      run.params = theta;
    }
    if (t == iters) break;
    LatentW gw;
    GeneratorParams gp;
    generator.backward(w, theta, tape, grad_image, &gw, &gp);
    latent_opt.step(latent, packing.reduce(gw));
    param_opt.step(theta.values(), gp.values());
  }
  return run;
}

constexpr int kRadiusSamples = 256;

}  // namespace

InversionResult invert(const ToyGenerator& generator, const FeatureExtractor& extractor,
                       const Image& degraded, ClassLabel c, const DegradationSpec& spec,
                       const InversionConfig& config, const CentroidSet* centroids) {
  const auto start = std::chrono::steady_clock::now();
  const int res = generator.layout().resolution;
  spec.validate(res, res);
  if (degraded.height != spec.output_height(res) || degraded.width != spec.output_width(res)) {
    throw ShapeMismatchError("observation size does not match the degradation of a " +
                             std::to_string(res) + "x" + std::to_string(res) + " image");
  }
  if (c.index < 0 || c.index >= generator.layout().classes) {
    throw InvalidClassError("class index " + std::to_string(c.index) + " out of range");
  }

  InversionResult out;
  out.mode = config.mode;

  CentroidSet own;
  const CentroidSet* set = centroids;
  if (config.mode == InversionMode::AvgInit) {
    const auto latents = sample_latents(generator, c, config.cluster.samples, config.cluster.seed);
    own = make_centroid_set(generator, mean_only(stack_rows(latents)));
    set = &own;
  } else if (set == nullptr) {
    own = build_centroids(generator, c, config.cluster);
    set = &own;
  }
  out.selection = select_centroid(degraded, *set, extractor, spec, config.cluster.degrade_centers);
  out.centroid = out.selection.latent;

  LossWeights weights = config.weights;
  if (config.mode == InversionMode::NoReg || config.mode == InversionMode::DirectW) weights.lambda2 = 0.0;

  if (config.mode == InversionMode::Joint) {
    JointRun joint = optimize_joint(generator, extractor, spec, degraded, out.centroid, weights,
                                    config.schedule);
    out.pivot = std::move(joint.latent);
    out.offset = out.pivot - out.centroid;
    out.theta_star = std::move(joint.params);
    out.stage1 = std::move(joint.trajectory);
    out.stage1_best = joint.best_iteration;
  } else {
    const OffsetObjective objective(generator, extractor, spec, degraded, out.centroid, weights);
    if (config.mode == InversionMode::DirectW) {
      LatentRun run = optimize_latent(objective, out.centroid, config.schedule);
      out.pivot = std::move(run.latent);
      out.offset = out.pivot - out.centroid;
      out.stage1 = std::move(run.trajectory);
      out.stage1_best = run.best_iteration;
    } else {
      LatentRun run = optimize_offset(objective, config.schedule);
      out.offset = std::move(run.latent);
      out.pivot = out.centroid + out.offset;
      out.stage1 = std::move(run.trajectory);
      out.stage1_best = run.best_iteration;
    }

    out.alpha = config.interpolation_radius.value_or(
        0.5 * median_pairwise_distance(generator, c, std::min(kRadiusSamples, config.cluster.samples),
                                       config.cluster.seed));
    const FinetuneObjective fobj(generator, extractor, spec, degraded, out.pivot,
                                 generator.snapshot(), weights);
    FinetuneRun ft = finetune_generator(fobj, config.schedule, c, out.alpha, config.seed);
    out.theta_star = std::move(ft.params);
    out.stage2 = std::move(ft.trajectory);
    out.stage2_best = ft.best_iteration;
  }

  out.restored = generator.synthesis(out.pivot, out.theta_star);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string to_string(InversionMode mode) {
  switch (mode) {
    case InversionMode::Cri: return "cri";
    case InversionMode::AvgInit: return "avg-init";
    case InversionMode::NoReg: return "no-reg";
    case InversionMode::DirectW: return "direct-w";
    case InversionMode::Joint: return "joint";
  }
  return "unknown";
}

InversionMode mode_from_string(const std::string& name) {
  for (auto m : {InversionMode::Cri, InversionMode::AvgInit, InversionMode::NoReg,
                 InversionMode::DirectW, InversionMode::Joint}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("mode", "unknown inversion mode '" + name + "'");
}

std::string to_string(LatentSpace space) { return space == LatentSpace::W ? "w" : "w+"; }

std::string to_string(OffsetNorm norm) { return norm == OffsetNorm::L2 ? "l2" : "l1"; }

}  // namespace cri
