#include "avloc/pipeline.hpp"

#include <stdexcept>

namespace avloc {

Model Model::init(const ModelConfig& cfg, uint64_t seed) {
  Model m;
  m.cfg = cfg;
  Rng rng(seed ^ 0x6D6F64656CULL);
  EncoderConfig vc;
  vc.in_channels = 3;
  vc.width = cfg.channels;
  vc.grid = cfg.grid;
  m.visual = EncoderWeights::init(vc, rng);
  EncoderConfig ac = vc;
  ac.in_channels = 1;
  m.audio = EncoderWeights::init(ac, rng);
  return m;
}

std::vector<Tensor*> Model::params() {
  std::vector<Tensor*> out = visual.params();
  for (Tensor* p : audio.params()) out.push_back(p);
  return out;
}

std::vector<const Tensor*> Model::params() const {
  std::vector<const Tensor*> out = visual.params();
  for (const Tensor* p : audio.params()) out.push_back(p);
  return out;
}

void Model::track(Tape& tape) {
  visual.track(tape);
  audio.track(tape);
}

ForwardOut Model::forward(Tape& tape, const Tensor& images, const Tensor& spectrograms,
                          const FinalMapWeights& w) const {
  if (images.rank() != 4 || images.dim(1) != cfg.image_size || images.dim(2) != cfg.image_size) {
    throw std::invalid_argument("forward: images " + shape_str(images.shape()) + " vs configured size " +
                                std::to_string(cfg.image_size));
  }
  if (spectrograms.rank() != 4 || spectrograms.dim(1) != cfg.spec_bins ||
      spectrograms.dim(2) != cfg.spec_frames) {
    throw std::invalid_argument("forward: spectrograms " + shape_str(spectrograms.shape()) +
                                " vs configured " + std::to_string(cfg.spec_bins) + "x" +
                                std::to_string(cfg.spec_frames));
  }
  ForwardOut out;
  out.s1 = stage1_forward(tape, images, spectrograms, visual, audio, cfg.softmax_temperature);
  out.s2 = stage2_forward(tape, images, out.s1.M_av, out.s1.l_a, visual, cfg.softmax_temperature,
                          cfg.recursion_steps);
  out.l_v = gap_normalized(tape, out.s1.F_v);
  out.l_v_att = gap_normalized(tape, out.s2.F_v_att);
  out.M_final = final_map(tape, out.s1.M_v, out.s1.M_a, out.s2.M_v_att, w);
  return out;
}

LossBreakdown compute_losses(Tape& tape, const ForwardOut& f, const LossConfig& cfg) {
  LossBreakdown out;
  out.ssl = ssl_loss(tape, f.s1.F_v, f.s1.l_a, f.s1.S_v, cfg);
  out.avpm = avpm_loss(tape, f.l_v_att, f.l_v, f.s1.l_a, cfg);
  out.sra = sra_loss(tape, spatial_distribution(tape, f.s2.F_v_att),
                     spatial_distribution(tape, f.s1.F_a));
  out.total = total_loss(tape, out.ssl, out.avpm, out.sra, cfg);
  return out;
}

}  // namespace avloc
