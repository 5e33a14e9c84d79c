#include "avloc/encoders.hpp"

#include <cmath>
#include <stdexcept>

#include "avloc/error.hpp"

namespace avloc {

Tensor make_spectrogram(const std::vector<double>& waveform, int sample_rate, int window, int hop) {
  if (sample_rate <= 0) throw std::invalid_argument("make_spectrogram: bad sample rate");
  if (hop <= 0 || window < hop) throw std::invalid_argument("make_spectrogram: need window >= hop > 0");
  if (static_cast<int>(waveform.size()) < window) {
    throw std::invalid_argument("make_spectrogram: waveform of " + std::to_string(waveform.size()) +
                                " samples is shorter than one window of " + std::to_string(window));
  }
  int frames = 1 + (static_cast<int>(waveform.size()) - window) / hop;
  int bins = window / 2 + 1;

  std::vector<double> hann(static_cast<size_t>(window));
  for (int t = 0; t < window; ++t) {
    hann[static_cast<size_t>(t)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * t / window);
  }
  // Direct DFT; window sizes here are small enough that an FFT buys nothing.
  std::vector<double> cos_tab(static_cast<size_t>(bins) * window), sin_tab(static_cast<size_t>(bins) * window);
  for (int b = 0; b < bins; ++b) {
    for (int t = 0; t < window; ++t) {
      double ang = 2.0 * M_PI * b * t / window;
      cos_tab[static_cast<size_t>(b) * window + t] = std::cos(ang);
      sin_tab[static_cast<size_t>(b) * window + t] = std::sin(ang);
    }
  }

  Tensor out({1, bins, frames, 1});
  for (int fr = 0; fr < frames; ++fr) {
    const double* seg = waveform.data() + static_cast<long>(fr) * hop;
    for (int b = 0; b < bins; ++b) {
      double re = 0.0, im = 0.0;
      const double* ct = cos_tab.data() + static_cast<size_t>(b) * window;
      const double* st = sin_tab.data() + static_cast<size_t>(b) * window;
      for (int t = 0; t < window; ++t) {
        double v = seg[t] * hann[static_cast<size_t>(t)];
        re += v * ct[t];
        im -= v * st[t];
      }
      out.at({0, b, fr, 0}) = std::log(re * re + im * im + kSpecEps);
    }
  }
  return out;
}

EncoderWeights EncoderWeights::init(const EncoderConfig& cfg, Rng& rng) {
  if (cfg.blocks <= 0 || static_cast<int>(cfg.strides.size()) != cfg.blocks) {
    throw std::invalid_argument("encoder: strides must list one entry per block");
  }
  if (cfg.width <= 0 || cfg.grid <= 0 || cfg.in_channels <= 0) {
    throw std::invalid_argument("encoder: nonpositive config field");
  }
  EncoderWeights w;
  w.cfg = cfg;
  int cin = cfg.in_channels;
  for (int b = 0; b < cfg.blocks; ++b) {
    double stddev = std::sqrt(2.0 / (3.0 * 3.0 * cin));
    w.kernels.push_back(random_normal({3, 3, cin, cfg.width}, rng, 0.0, stddev));
    w.biases.push_back(Tensor({cfg.width}));
    cin = cfg.width;
  }
  return w;
}

std::vector<Tensor*> EncoderWeights::params() {
  std::vector<Tensor*> out;
  for (size_t b = 0; b < kernels.size(); ++b) {
    out.push_back(&kernels[b]);
    out.push_back(&biases[b]);
  }
  return out;
}

std::vector<const Tensor*> EncoderWeights::params() const {
  std::vector<const Tensor*> out;
  for (size_t b = 0; b < kernels.size(); ++b) {
    out.push_back(&kernels[b]);
    out.push_back(&biases[b]);
  }
  return out;
}

void EncoderWeights::track(Tape& tape) {
  for (Tensor* p : params()) *p = tape.watch(*p);
}

Tensor encode(Tape& tape, const EncoderWeights& weights, const Tensor& input) {
  if (input.rank() != 4 || input.dim(3) != weights.cfg.in_channels) {
    throw std::invalid_argument("encode: input shape " + shape_str(input.shape()) + " vs expected channels " +
                                std::to_string(weights.cfg.in_channels));
  }
  Tensor h = input;
  for (int b = 0; b < weights.cfg.blocks; ++b) {
    h = tape.conv2d(h, weights.kernels[static_cast<size_t>(b)], weights.biases[static_cast<size_t>(b)],
                    weights.cfg.strides[static_cast<size_t>(b)], 1, Tape::Pad::kReplicate);
    h = tape.relu(h);
  }
  if (h.dim(1) != weights.cfg.grid || h.dim(2) != weights.cfg.grid) {
    h = tape.bilinear_resize(h, weights.cfg.grid, weights.cfg.grid);
  }
  return h;
}

Tensor encode_visual(Tape& tape, const EncoderWeights& weights, const Tensor& images) {
  return encode(tape, weights, images);
}

Tensor encode_audio(Tape& tape, const EncoderWeights& weights, const Tensor& spectrograms) {
  if (spectrograms.rank() != 4 || spectrograms.dim(3) != 1) {
    throw std::invalid_argument("encode_audio: expected single-channel input, got " +
                                shape_str(spectrograms.shape()));
  }
  return encode(tape, weights, spectrograms);
}

Tensor gap_normalized(Tape& tape, const Tensor& features) {
  if (features.rank() != 4) {
    throw std::invalid_argument("gap_normalized: expected [N,h,w,c], got " + shape_str(features.shape()));
  }
  return tape.l2_normalize(tape.mean_pool_hw(features));
}

}  // namespace avloc
