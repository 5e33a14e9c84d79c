#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avloc/tensor.hpp"

namespace avloc {

struct SceneSpec {
  uint64_t seed = 0;
  int num_classes = 8;
  int image_size = 64;
  int spec_size = 64;  // spectrogram is spec_size x spec_size
  double scale_min = 0.35, scale_max = 0.6;  // object extent as a fraction of the image
  int distractor_count = 2;
  int sample_rate = 8000;
  void validate() const;

  int stft_window() const { return 2 * (spec_size - 1); }
  int stft_hop() const { return spec_size - 1; }
  int waveform_len() const { return spec_size * spec_size - 1; }
};

struct LabeledScene {
  Tensor image;                  // [H,W,3] in [0,1]
  Tensor spectrogram;            // [bins,frames,1]
  std::vector<uint8_t> gt_mask;  // H*W; exactly the sounding object's pixels
  int class_id = 0;
  // footprint of the sounding object (half-open bbox; circle params valid
  // when is_circle)
  int bbox_x0 = 0, bbox_y0 = 0, bbox_x1 = 0, bbox_y1 = 0;
  bool is_circle = false;
  int cx = 0, cy = 0, radius = 0;
};

// Class identity drives both the object's color/texture and the harmonic
// stack of the waveform, so audio-visual correspondence is learnable.
// Distractors are silent objects of other classes, drawn underneath.
// (seed, index) fully determines the scene.
LabeledScene generate_scene(const SceneSpec& spec, int index);

// Per-class fundamental as a spectrogram bin; geometric spacing.
int class_fundamental_bin(const SceneSpec& spec, int class_id);
// Per-class RGB color.
void class_color(int class_id, int num_classes, double rgb[3]);

struct Split {
  std::vector<int> train, test;
};

// Disjoint index ranges: train [0, n_train), test [n_train, n_train+n_test).
Split generate_split(const SceneSpec& spec, int n_train, int n_test);

struct Dataset {
  int image_size = 0, spec_bins = 0, spec_frames = 0, num_classes = 0;
  std::vector<int> class_ids;
  std::vector<std::vector<float>> images;   // H*W*3
  std::vector<std::vector<float>> specs;    // bins*frames
  std::vector<std::vector<uint8_t>> masks;  // H*W
  size_t size() const { return class_ids.size(); }
};

// dir/ gets manifest.txt, annotations.txt and one sample_NNNNNN.bin per
// index. Fully deterministic bytes.
void dump_split(const SceneSpec& spec, const std::vector<int>& indices, const std::string& dir);
Dataset load_split(const std::string& dir);

}  // namespace avloc
