#pragma once

#include <string>
#include <vector>

#include "avloc/config.hpp"
#include "avloc/pipeline.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

struct Adam {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Tensor> m, v;

  void init(const std::vector<Tensor*>& params);
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
};

struct TrainStats {
  long steps = 0;
  double first_total = 0.0;
  double last_total = 0.0;
  std::string final_checkpoint;
};

// Trains on data_dir/train, writing loss_log.txt, per-epoch checkpoints and
// checkpoint_final.bin under out_dir. With a resume path, continues the
// saved trajectory exactly. (seed, config) determines every logged byte.
TrainStats train_run(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
                     const std::string& resume_path = "");

// Batch assembly from a loaded dataset split.
Tensor batch_images(const Dataset& ds, const std::vector<int>& ids);
Tensor batch_specs(const Dataset& ds, const std::vector<int>& ids);

}  // namespace avloc
