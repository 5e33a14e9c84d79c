#pragma once

#include "avloc/tape.hpp"

namespace avloc {

struct LossConfig {
  double tau = 0.03;    // distance temperature in the pair matching loss
  double delta = 25.0;  // triplet margin
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double ssl_pos_thresh = 0.65;
  double ssl_neg_thresh = 0.4;
  double ssl_temp = 0.07;
  void validate() const;
};

// D(anchor,pos) + max(delta - D(anchor,neg), 0) with D(a,b) = ||(a-b)/tau||^2.
// Inputs are single embedding rows [c].
Tensor triplet_term(Tape& tape, const Tensor& anchor, const Tensor& pos, const Tensor& neg, double tau,
                    double delta);

// Mean over ordered pairs (i, j != i) of the audio and visual triplet terms
// anchored at the attentive-visual embedding. N < 2 has no negatives: the
// loss is 0 and a warning is logged.
Tensor avpm_loss(Tape& tape, const Tensor& lv_att, const Tensor& lv, const Tensor& la,
                 const LossConfig& cfg);

// Channel sum -> per-sample min-max -> flatten -> softmax. [N,h,w,c] -> [N,h*w].
Tensor spatial_distribution(Tape& tape, const Tensor& F);

// Mean over the batch of KL(G_v_att || G_a). The target side is detached:
// the audio stream is pulled toward the attentive-visual one, never the
// reverse.
Tensor sra_loss(Tape& tape, const Tensor& G_v_att, const Tensor& G_a);

// Contrastive localization loss. Per sample, the positive response averages
// the cosine of l_a against its own image's cells selected by the min-max
// normalized S_v at ssl_pos_thresh; the negative response averages the
// below-ssl_neg_thresh own cells together with every cell of every other
// image. Cell selection is frozen at forward time (piecewise-constant in
// S_v); gradients flow through the pooled cosines.
Tensor ssl_loss(Tape& tape, const Tensor& F_v, const Tensor& l_a, const Tensor& S_v,
                const LossConfig& cfg);

// ssl + lambda1 * avpm + lambda2 * sra. Throws naming the term when a part
// is non-finite.
Tensor total_loss(Tape& tape, const Tensor& ssl, const Tensor& avpm, const Tensor& sra,
                  const LossConfig& cfg);

}  // namespace avloc
