#include "avloc/attention.hpp"

#include <stdexcept>

namespace avloc {

Tensor similarity_map(Tape& tape, const Tensor& F, const Tensor& l, double eps) {
  if (F.rank() != 4 || l.rank() != 2 || F.dim(3) != l.dim(1)) {
    throw std::invalid_argument("similarity_map: feature " + shape_str(F.shape()) + " vs vector " +
                                shape_str(l.shape()));
  }
  Tensor cos = tape.cosine_map(F, l);
  return tape.normalize_sum(cos, eps);
}

Tensor softmax_map(Tape& tape, const Tensor& S, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_map: temperature must be positive");
  if (S.rank() != 3) throw std::invalid_argument("softmax_map: expected [N,h,w], got " + shape_str(S.shape()));
  int n = S.dim(0), h = S.dim(1), w = S.dim(2);
  Tensor flat = tape.reshape(tape.scale(S, 1.0 / temperature), {n, h * w});
  return tape.reshape(tape.softmax(flat), {n, h, w});
}

Tensor minmax_normalize(Tape& tape, const Tensor& F, double eps) {
  return tape.minmax_scale(F, eps);
}

Tensor fuse_features(Tape& tape, const Tensor& F_v, const Tensor& F_a_bar) {
  if (F_v.shape() != F_a_bar.shape()) {
    throw std::invalid_argument("fuse_features: shapes differ, " + shape_str(F_v.shape()) + " vs " +
                                shape_str(F_a_bar.shape()));
  }
  return tape.mul(F_v, F_a_bar);
}

Tensor integrate_maps(Tape& tape, const Tensor& M_v, const Tensor& M_a) {
  if (M_v.shape() != M_a.shape()) {
    throw std::invalid_argument("integrate_maps: shapes differ, " + shape_str(M_v.shape()) + " vs " +
                                shape_str(M_a.shape()));
  }
  return tape.scale(tape.add(M_a, M_v), 0.5);
}

Stage1Out stage1_forward(Tape& tape, const Tensor& images, const Tensor& spectrograms,
                         const EncoderWeights& visual, const EncoderWeights& audio, double temperature) {
  Stage1Out out;
  out.F_v = encode_visual(tape, visual, images);
  out.F_a = encode_audio(tape, audio, spectrograms);
  out.l_a = gap_normalized(tape, out.F_a);

  out.S_v = similarity_map(tape, out.F_v, out.l_a);
  out.M_v = softmax_map(tape, out.S_v, temperature);

  Tensor F_a_bar = minmax_normalize(tape, out.F_a);
  out.F_av = fuse_features(tape, out.F_v, F_a_bar);
  Tensor S_av = similarity_map(tape, out.F_av, out.l_a);
  out.M_a = softmax_map(tape, S_av, temperature);

  out.M_av = integrate_maps(tape, out.M_v, out.M_a);
  return out;
}

}  // namespace avloc
