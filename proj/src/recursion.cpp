#include "avloc/recursion.hpp"

#include <stdexcept>

namespace avloc {

void FinalMapWeights::validate() const {
  if (w1 < 0 || w2 < 0 || w3 < 0) throw std::invalid_argument("final_map: negative weight");
  if (w1 == 0 && w2 == 0 && w3 == 0) throw std::invalid_argument("final_map: all weights zero");
}

Tensor resize_map(Tape& tape, const Tensor& M_av, int H, int W) {
  if (M_av.rank() != 3) throw std::invalid_argument("resize_map: expected [N,h,w], got " + shape_str(M_av.shape()));
  if (H <= 0 || W <= 0) throw std::invalid_argument("resize_map: zero target dims");
  if (H < M_av.dim(1) || W < M_av.dim(2)) {
    throw std::invalid_argument("resize_map: target " + std::to_string(H) + "x" + std::to_string(W) +
                                " smaller than source " + shape_str(M_av.shape()));
  }
  return tape.bilinear_resize(M_av, H, W);
}

Tensor attend_image(Tape& tape, const Tensor& images, const Tensor& M_av_r) {
  if (images.rank() != 4 || M_av_r.rank() != 3 || images.dim(0) != M_av_r.dim(0) ||
      images.dim(1) != M_av_r.dim(1) || images.dim(2) != M_av_r.dim(2)) {
    throw std::invalid_argument("attend_image: image " + shape_str(images.shape()) + " vs map " +
                                shape_str(M_av_r.shape()));
  }
  int n = M_av_r.dim(0), h = M_av_r.dim(1), w = M_av_r.dim(2);
  Tensor peak = tape.reshape(tape.reduce_max_batch(M_av_r), {n, 1, 1});
  Tensor gate = tape.div(M_av_r, peak);
  return tape.mul(images, tape.reshape(gate, {n, h, w, 1}));
}

Stage2Out stage2_forward(Tape& tape, const Tensor& images, const Tensor& M_av, const Tensor& l_a,
                         const EncoderWeights& visual, double temperature, int steps) {
  if (steps < 1) throw std::invalid_argument("stage2_forward: steps must be >= 1");
  Stage2Out out;
  Tensor source = M_av;
  for (int k = 0; k < steps; ++k) {
    Tensor resized = resize_map(tape, source, images.dim(1), images.dim(2));
    out.I_v_att = attend_image(tape, images, resized);
    out.F_v_att = encode_visual(tape, visual, out.I_v_att);
    Tensor S_v_att = similarity_map(tape, out.F_v_att, l_a);
    out.M_v_att = softmax_map(tape, S_v_att, temperature);
    source = out.M_v_att;
  }
  return out;
}

Tensor final_map(Tape& tape, const Tensor& M_v, const Tensor& M_a, const Tensor& M_v_att,
                 const FinalMapWeights& w) {
  w.validate();
  if (M_v.shape() != M_a.shape() || M_v.shape() != M_v_att.shape()) {
    throw std::invalid_argument("final_map: map shapes differ");
  }
  Tensor acc = tape.scale(M_v, w.w1);
  acc = tape.add(acc, tape.scale(M_a, w.w2));
  return tape.add(acc, tape.scale(M_v_att, w.w3));
}

}  // namespace avloc
