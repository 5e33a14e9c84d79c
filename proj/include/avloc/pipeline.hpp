#pragma once

#include "avloc/losses.hpp"
#include "avloc/recursion.hpp"

namespace avloc {

struct ModelConfig {
  int image_size = 64;
  int spec_bins = 64;
  int spec_frames = 64;
  int grid = 7;
  int channels = 32;
  double softmax_temperature = 1.0;
  int recursion_steps = 1;
};

struct ForwardOut {
  Stage1Out s1;
  Stage2Out s2;
  Tensor l_v, l_v_att;  // [N,c]
  Tensor M_final;       // [N,h,w]
};

// Both stages share `visual` by construction: there is exactly one visual
// parameter set.
struct Model {
  ModelConfig cfg;
  EncoderWeights visual;
  EncoderWeights audio;

  static Model init(const ModelConfig& cfg, uint64_t seed);

  // Stable order: visual params, then audio params.
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  void track(Tape& tape);

  ForwardOut forward(Tape& tape, const Tensor& images, const Tensor& spectrograms,
                     const FinalMapWeights& w) const;
};

struct LossBreakdown {
  Tensor ssl, avpm, sra, total;
};

LossBreakdown compute_losses(Tape& tape, const ForwardOut& f, const LossConfig& cfg);

}  // namespace avloc
