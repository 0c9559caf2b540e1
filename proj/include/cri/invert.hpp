#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cri/cluster.hpp"
#include "cri/degrade.hpp"
#include "cri/errors.hpp"
#include "cri/generator.hpp"
#include "cri/perception.hpp"

namespace cri {

enum class OffsetNorm { L2, L1 };
enum class LatentSpace { W, WPlus };
enum class InversionMode { Cri, AvgInit, NoReg, DirectW, Joint };

struct LossWeights {
  double lambda1 = 1.0;      // stage-1 pixel term
  double lambda2 = 0.1;      // offset norm
  double lambda_l2 = 1.0;    // stage-2 pixel term
  double lambda_r = 0.1;     // locality term
  double lambda_l2_r = 1.0;  // pixel term inside the locality term
  OffsetNorm offset_norm = OffsetNorm::L2;

  bool operator==(const LossWeights&) const = default;
};

struct StageSchedule {
  int stage1_iters = 300;
  int stage2_iters = 100;
  double stage1_lr = 0.01;
  double stage2_lr = 0.001;
  LatentSpace space = LatentSpace::WPlus;

  bool operator==(const StageSchedule&) const = default;
};

// Raw (unweighted) loss terms of one evaluation plus the weighted total.
// Stage 1: regularizer is the offset norm. Stage 2: regularizer is L_R.
struct LossTerms {
  double total = 0.0;
  double perceptual = 0.0;
  double pixel = 0.0;
  double regularizer = 0.0;

  double reconstruction(double pixel_weight) const { return perceptual + pixel_weight * pixel; }
  bool operator==(const LossTerms&) const = default;
};

using Trajectory = std::vector<LossTerms>;

inline constexpr double kNormSmoothing = 1e-12;
inline constexpr double kDivergenceLimit = 1e6;

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& stage, int iteration, Trajectory trajectory)
      : Error(stage + " diverged at iteration " + std::to_string(iteration)),
        stage_(stage),
        iteration_(iteration),
        trajectory_(std::move(trajectory)) {}

  const std::string& stage() const { return stage_; }
  int iteration() const { return iteration_; }
  const Trajectory& trajectory() const { return trajectory_; }

 private:
  std::string stage_;
  int iteration_;
  Trajectory trajectory_;
};

// Reconstruction part shared by both stages: LPIPS-style distance and mean
// squared error between the observation and D(image).
class ReconstructionLoss {
 public:
  ReconstructionLoss(const FeatureExtractor& extractor, DegradationSpec spec, const Image& degraded);

  // Value terms and gradient with respect to the clean (pre-degradation) image.
  LossTerms evaluate(const Image& image, double pixel_weight, Image* grad_image) const;

  const Image& observation() const { return degraded_; }
  const DegradationSpec& spec() const { return spec_; }

 private:
  const FeatureExtractor* extractor_;
  DegradationSpec spec_;
  Image degraded_;
  FeatureEmbedding target_;
};

// L_op(w_off) = L_LPIPS + lambda1 L2 + lambda2 ||w_off||, with the centroid
// and the generator held fixed.
class OffsetObjective {
 public:
  OffsetObjective(const ToyGenerator& generator, const FeatureExtractor& extractor,
                  const DegradationSpec& spec, const Image& degraded, LatentW centroid,
                  LossWeights weights);

  LossTerms evaluate(const LatentW& offset, LatentW* grad_offset) const;
  // Reconstruction terms at a full latent w; regularizer is zero.
  LossTerms evaluate_latent(const LatentW& w, LatentW* grad_w) const;

  const LatentW& centroid() const { return centroid_; }

 private:
  const ToyGenerator* generator_;
  ReconstructionLoss recon_;
  LatentW centroid_;
  LossWeights weights_;
};

LossTerms stage1_loss(const ToyGenerator& generator, const FeatureExtractor& extractor,
                      const Image& degraded, const LatentW& centroid, const LatentW& offset,
                      const DegradationSpec& spec, const LossWeights& weights, LatentW* grad_offset);

struct LatentRun {
  LatentW latent;  // best iterate (the offset for optimize_offset, w for optimize_latent)
  Trajectory trajectory;
  int best_iteration = 0;
  LossTerms best;
};

// Adam on the offset only; trajectory holds stage1_iters + 1 evaluations and
// the best-loss iterate is returned.
LatentRun optimize_offset(const OffsetObjective& objective, const StageSchedule& schedule);
// Adam on w itself, starting at `start`, reconstruction terms only.
LatentRun optimize_latent(const OffsetObjective& objective, const LatentW& start,
                          const StageSchedule& schedule);

// pivot + alpha (w_rand - pivot) / ||w_rand - pivot||.
LatentW interpolate_code(const LatentW& pivot, const LatentW& w_rand, double alpha);
// Fresh locality code for a given draw counter.
LatentW locality_code(const ToyGenerator& generator, const LatentW& pivot, ClassLabel c,
                      double alpha, std::uint64_t seed, std::uint64_t counter);

// L_ft(theta) = L_LPIPS + lambda_L2 L2 + lambda_R L_R with the pivot fixed.
class FinetuneObjective {
 public:
  FinetuneObjective(const ToyGenerator& generator, const FeatureExtractor& extractor,
                    const DegradationSpec& spec, const Image& degraded, LatentW pivot,
                    GeneratorParams original, LossWeights weights);

  LossTerms evaluate(const GeneratorParams& theta, const LatentW& code, GeneratorParams* grad) const;
  // L_R alone and its gradient with respect to theta.
  double locality(const GeneratorParams& theta, const LatentW& code, GeneratorParams* grad) const;

  const ToyGenerator& generator() const { return *generator_; }
  const LatentW& pivot() const { return pivot_; }
  const GeneratorParams& original() const { return original_; }

 private:
  const ToyGenerator* generator_;
  const FeatureExtractor* extractor_;
  ReconstructionLoss recon_;
  LatentW pivot_;
  GeneratorParams original_;
  LossWeights weights_;
};

double locality_term(const ToyGenerator& generator, const FeatureExtractor& extractor,
                     const GeneratorParams& theta, const GeneratorParams& theta_star,
                     const LatentW& pivot, ClassLabel c, double alpha, std::uint64_t seed,
                     std::uint64_t counter = 0, double lambda_l2_r = 1.0);

struct FinetuneRun {
  GeneratorParams params;
  Trajectory trajectory;
  int best_iteration = 0;
};

// Adam on the generator parameters, starting from the generator's current
// parameters; a fresh locality code is drawn each iteration.
FinetuneRun finetune_generator(const FinetuneObjective& objective, const StageSchedule& schedule,
                               ClassLabel c, double alpha, std::uint64_t seed);

// Median pairwise distance of `count` class samples, measured on full W+ stacks.
double median_pairwise_distance(const ToyGenerator& generator, ClassLabel c, int count,
                                std::uint64_t seed);

struct InversionConfig {
  ClusterConfig cluster;
  LossWeights weights;
  StageSchedule schedule;
  std::optional<double> interpolation_radius;  // default: half the median pairwise distance
  std::uint64_t seed = 0;
  InversionMode mode = InversionMode::Cri;
};

struct InversionResult {
  InversionMode mode = InversionMode::Cri;
  Selection selection;
  LatentW centroid;
  LatentW offset;
  LatentW pivot;
  GeneratorParams theta_star;
  Image restored;
  Trajectory stage1;
  Trajectory stage2;
  int stage1_best = 0;
  int stage2_best = 0;
  double alpha = 0.0;
  double seconds = 0.0;
};

// Full pipeline: sample, cluster, select, optimize the offset, finetune.
// `centroids` may supply a precomputed set (ignored by avg-init).
InversionResult invert(const ToyGenerator& generator, const FeatureExtractor& extractor,
                       const Image& degraded, ClassLabel c, const DegradationSpec& spec,
                       const InversionConfig& config, const CentroidSet* centroids = nullptr);

std::string to_string(InversionMode mode);
InversionMode mode_from_string(const std::string& name);
std::string to_string(LatentSpace space);
std::string to_string(OffsetNorm norm);

}  // namespace cri
