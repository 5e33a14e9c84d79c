#pragma once

#include <string>

#include "avloc/metrics.hpp"
#include "avloc/pipeline.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

struct EvalOptions {
  double act_thresh = 0.5;
  int batch_size = 16;
  std::string annotations_path;  // when set, consensus maps come from boxes instead of masks
};

// Runs the full two-stage forward over the split and scores every component
// map against the consensus ground truth.
EvalReport evaluate_model(const Model& model, const FinalMapWeights& weights, const Dataset& test,
                          const EvalOptions& opt);

// Deterministic key-value report plus a per-sample table.
void write_report(const std::string& path, const EvalReport& rep, double act_thresh);

}  // namespace avloc
