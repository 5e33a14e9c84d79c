#pragma once

#include "avloc/attention.hpp"

namespace avloc {

struct FinalMapWeights {
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
  void validate() const;
};

// Bilinear upsample of the integrated map to image resolution. Target dims
// must not shrink the map.
Tensor resize_map(Tape& tape, const Tensor& M_av, int H, int W);

// Gates the image with the resized map. The map is rescaled per sample to
// max 1 first: localization maps sum to 1, so their raw values are
// O(1/(h*w)) and would nearly black out the image otherwise.
Tensor attend_image(Tape& tape, const Tensor& images, const Tensor& M_av_r);

struct Stage2Out {
  Tensor I_v_att;  // [N,H,W,3]
  Tensor F_v_att;  // [N,h,w,c]
  Tensor M_v_att;  // [N,h,w]
};

// Re-encodes the gated image with the shared visual encoder and produces the
// refined map. steps > 1 repeats the gate/re-encode cycle, feeding each
// refined map back in as the attention source.
Stage2Out stage2_forward(Tape& tape, const Tensor& images, const Tensor& M_av, const Tensor& l_a,
                         const EncoderWeights& visual, double temperature, int steps = 1);

// w1*M_v + w2*M_a + w3*M_v_att. Not renormalized; evaluation thresholds are
// relative.
Tensor final_map(Tape& tape, const Tensor& M_v, const Tensor& M_a, const Tensor& M_v_att,
                 const FinalMapWeights& w);

}  // namespace avloc
