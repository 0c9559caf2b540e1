#pragma once

#include <cstdint>
#include <vector>

#include "cri/image.hpp"
#include "cri/kernels/kernels.hpp"
#include "cri/latent.hpp"
#include "cri/params.hpp"
#include "cri/rng.hpp"

namespace cri {

struct GeneratorLayout {
  int resolution = 32;
  int layers = 6;
  int z_dim = 16;
  int w_dim = 32;
  int classes = 4;
  int modes = 3;
  int hidden = 32;

  bool operator==(const GeneratorLayout&) const = default;
};

// Readout slots per synthesis layer.
enum BlobReadout : int { kCx = 0, kCy, kLogSigma, kRed, kGreen, kBlue, kAmp, kReadoutSize };

// Intermediate values of one synthesis pass, kept for the backward pass.
struct SynthesisTape {
  std::vector<double> readout;  // layers x kReadoutSize pre-activations
  std::vector<kernels::Blob> blobs;
  Image image;
};

// Procedural conditional generator.
//
// Mapping: w = A2 tanh(A1 z + b1) + b2 + E_c + mu_{c,k}, where the mode k is
// the argmax of z . u_{c,k} (lowest index on ties). The mode offsets mu_{c,k}
// are orthogonal with radius chosen so modes sit far outside the spread of the
// nonlinear term, which makes every class latent distribution multi-modal.
//
// Synthesis: layer l reads out (cx, cy, log sigma, r, g, b, amp) from row l of
// w through an affine map and renders one Gaussian blob; the blobs are summed
// in logit space and squashed per channel.
//
// All weights derive from the single generator seed. Only the synthesis
// readout is exposed as trainable GeneratorParams; the mapping is fixed.
class ToyGenerator {
 public:
  explicit ToyGenerator(std::uint64_t seed, GeneratorLayout layout = {});

  const GeneratorLayout& layout() const { return layout_; }
  std::uint64_t seed() const { return seed_; }

  LatentZ sample_z(Engine& engine) const;
  int mode_index(const LatentZ& z, ClassLabel c) const;
  std::vector<double> map_row(const LatentZ& z, ClassLabel c) const;
  LatentW mapping(const LatentZ& z, ClassLabel c) const;

  // mu_{c,k} alone, and mu_{c,k} plus the shared affine constant
  // A2 tanh(b1) + b2 + E_c (the value of the mapping at z = 0 for that mode).
  std::vector<double> mode_offset(ClassLabel c, int k) const;
  std::vector<double> mode_anchor(ClassLabel c, int k) const;

  const GeneratorParams& params() const { return params_; }
  GeneratorParams snapshot() const { return params_; }
  // Throws CorruptSnapshotError when the layout differs.
  void restore(const GeneratorParams& snapshot);

  Image synthesis(const LatentW& w) const { return synthesis(w, params_); }
  Image synthesis(const LatentW& w, const GeneratorParams& params) const;

  SynthesisTape forward(const LatentW& w, const GeneratorParams& params) const;
  // Accumulates nothing: grad_w / grad_params are overwritten. Either may be null.
  void backward(const LatentW& w, const GeneratorParams& params, const SynthesisTape& tape,
                const Image& grad_image, LatentW* grad_w, GeneratorParams* grad_params) const;

  LatentW zero_latent() const { return LatentW(layout_.layers, layout_.w_dim); }

 private:
  void check_class(ClassLabel c) const;
  void check_latent(const LatentW& w) const;

  GeneratorLayout layout_;
  std::uint64_t seed_;

  std::vector<double> a1_;  // hidden x z_dim
  std::vector<double> b1_;  // hidden
  std::vector<double> a2_;  // w_dim x hidden
  std::vector<double> b2_;  // w_dim
  std::vector<double> class_embed_;  // classes x w_dim
  std::vector<double> mode_offsets_;  // classes x modes x w_dim
  std::vector<double> mode_dirs_;  // classes x modes x z_dim

  GeneratorParams params_;
};

}  // namespace cri
