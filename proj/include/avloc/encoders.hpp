#pragma once

#include <vector>

#include "avloc/rng.hpp"
#include "avloc/tape.hpp"

namespace avloc {

// log(|STFT|^2 + eps) guard; keeps silence representable.
inline constexpr double kSpecEps = 1e-10;

// Log-power spectrogram of a mono waveform, Hann window. Output shape
// [1, bins, frames, 1] with bins = window/2 + 1 (frequency rows, time
// columns). Throws if the waveform is shorter than one window.
Tensor make_spectrogram(const std::vector<double>& waveform, int sample_rate, int window, int hop);

struct EncoderConfig {
  int in_channels = 3;
  int width = 32;      // channel count of every block and of the output features
  int grid = 7;        // output features are resized to grid x grid
  int blocks = 4;
  std::vector<int> strides = {2, 2, 2, 1};
};

// Weights of the 4-block convnet (conv3x3 -> relu per block, replicate
// padding). A single instance serves both pipeline stages: sharing is by
// construction, not by copying.
struct EncoderWeights {
  EncoderConfig cfg;
  std::vector<Tensor> kernels;  // [3,3,cin,cout] per block
  std::vector<Tensor> biases;   // [cout] per block

  static EncoderWeights init(const EncoderConfig& cfg, Rng& rng);

  // Stable parameter order: kernel, bias per block.
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;

  void track(Tape& tape);  // registers every parameter as a leaf
};

// [N,H,W,in_channels] -> [N,grid,grid,width]. Bilinear resize brings the
// conv output onto the configured grid.
Tensor encode(Tape& tape, const EncoderWeights& weights, const Tensor& input);

// Contract aliases: image batches are [N,H,W,3] in [0,1]; spectrogram
// batches are [N,bins,frames,1].
Tensor encode_visual(Tape& tape, const EncoderWeights& weights, const Tensor& images);
Tensor encode_audio(Tape& tape, const EncoderWeights& weights, const Tensor& spectrograms);

// Global average pool over the grid, then L2-normalize rows. Zero rows
// (silent inputs) stay zero instead of dividing by zero.
Tensor gap_normalized(Tape& tape, const Tensor& features);

}  // namespace avloc
