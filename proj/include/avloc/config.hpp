#pragma once

#include <cstdint>
#include <string>

#include "avloc/losses.hpp"
#include "avloc/pipeline.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

// Flat key = value configuration. Hyperparameter keys use their canonical
// names (tau, delta, lambda1, lambda2, w1, w2, w3) so runs are traceable.
struct RunConfig {
  // model
  int image_size = 64;
  int spec_bins = 64;
  int spec_frames = 64;
  int grid = 7;
  int channels = 32;
  double softmax_temperature = 1.0;
  int recursion_steps = 1;
  // final map combination
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
  // losses
  double tau = 0.03;
  double delta = 25.0;
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double ssl_pos_thresh = 0.65;
  double ssl_neg_thresh = 0.4;
  double ssl_temp = 0.07;
  // optimization
  double lr = 1e-4;
  int batch_size = 16;
  int epochs = 10;
  int max_steps = 0;  // 0: no cap
  uint64_t seed = 0;
  int checkpoint_every = 1;  // epochs
  // synthetic data
  int num_classes = 8;
  int train_scenes = 2000;
  int test_scenes = 200;
  double object_scale_min = 0.35;
  double object_scale_max = 0.6;
  int distractor_count = 2;
  int sample_rate = 8000;
  // evaluation
  double act_thresh = 0.5;

  static RunConfig from_file(const std::string& path);
  static RunConfig parse(const std::string& text);
  std::string to_text() const;
  void validate() const;

  LossConfig loss_config() const;
  ModelConfig model_config() const;
  SceneSpec scene_spec() const;
  FinalMapWeights final_weights() const;

  // One line per field that diverges from the full-scale reference setup.
  std::string divergence_note() const;
};

}  // namespace avloc
