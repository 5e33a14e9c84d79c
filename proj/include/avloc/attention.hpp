#pragma once

#include "avloc/encoders.hpp"
#include "avloc/tape.hpp"

namespace avloc {

// Guard for the sum-of-cosines denominator and for min-max ranges. A cosine
// sum this close to zero has no usable direction, so the map falls back to
// uniform.
inline constexpr double kDenEps = 1e-8;

// Cell (i,j) = cos(F[i,j], l) / sum of cosines over the grid. |sum| < eps
// falls back to a uniform map. [N,h,w,c] x [N,c] -> [N,h,w].
Tensor similarity_map(Tape& tape, const Tensor& F, const Tensor& l, double eps = kDenEps);

// Spatial softmax of S / temperature, per sample. Sums to 1, strictly
// positive, argmax-preserving.
Tensor softmax_map(Tape& tape, const Tensor& S, double temperature);

// Per-sample (F - min) / (max - min + eps) over the whole feature map;
// constant maps come out all-zeros.
Tensor minmax_normalize(Tape& tape, const Tensor& F, double eps = kDenEps);

// Elementwise product transferring visual detail into the audio stream.
Tensor fuse_features(Tape& tape, const Tensor& F_v, const Tensor& F_a_bar);

// Mean of the two localization maps; stays normalized.
Tensor integrate_maps(Tape& tape, const Tensor& M_v, const Tensor& M_a);

struct Stage1Out {
  Tensor F_v, F_a, F_av;  // [N,h,w,c]
  Tensor l_a;             // [N,c]
  Tensor S_v;             // [N,h,w]
  Tensor M_v, M_a, M_av;  // [N,h,w]
};

// Full spatial-integration stage: visual and audio streams, feature fusion,
// both localization maps and their integration.
Stage1Out stage1_forward(Tape& tape, const Tensor& images, const Tensor& spectrograms,
                         const EncoderWeights& visual, const EncoderWeights& audio, double temperature);

}  // namespace avloc
