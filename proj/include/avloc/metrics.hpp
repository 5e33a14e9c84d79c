#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "avloc/tensor.hpp"

namespace avloc {

// Annotator-tagged box in pixel coordinates, half-open: covers x0 <= x < x1,
// y0 <= y < y1.
struct AnnotBox {
  int annotator = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Per-pixel fraction of annotators whose box set covers the pixel.
struct ConsensusMap {
  int H = 0, W = 0;
  std::vector<double> weights;  // H*W, row-major, values in [0,1]

  static ConsensusMap from_boxes(const std::vector<AnnotBox>& boxes, int H, int W);
  static ConsensusMap from_mask(const std::vector<uint8_t>& mask, int H, int W);

  double weight_sum() const;
};

// Consensus IoU of a prediction map against the consensus ground truth.
// The activated set is pred >= act_thresh * max(pred), making the metric
// invariant to positive rescaling of the prediction. An all-zero prediction
// scores 0 with a warning.
double ciou(const Tensor& pred, const ConsensusMap& gt, double act_thresh = 0.5);

// Trapezoidal area under the success-ratio curve over thresholds
// 0, 0.05, ..., 1.0.
double success_auc(const std::vector<double>& cious);

// Mean success ratio over IoU thresholds 0.50, 0.55, ..., 0.95.
double mciou_from(const std::vector<double>& cious);
double mciou(const std::vector<Tensor>& preds, const std::vector<ConsensusMap>& gts,
             double act_thresh = 0.5);

// Success ratio at a single threshold (the headline cIoU_0.5 number).
double success_ratio(const std::vector<double>& cious, double threshold);

// Annotation file: one box per line, "sample_index annotator x0 y0 x1 y1",
// '#' starts a comment. Boxes must lie inside H x W.
std::map<int, std::vector<AnnotBox>> read_annotations(const std::string& path, int H, int W);
void write_annotations(const std::string& path, const std::map<int, std::vector<AnnotBox>>& boxes);

struct EvalReport {
  int samples = 0;
  double ciou_at_half = 0.0;  // success ratio at 0.5
  double auc = 0.0;
  double mciou = 0.0;
  double mean_ciou = 0.0;  // raw mean of per-sample cIoU
  std::vector<double> per_sample;
  // standalone metrics of the component maps, keyed "m_v", "m_a",
  // "m_v_att", "m_final"
  std::map<std::string, double> per_map_ciou_half;
  std::map<std::string, double> per_map_auc;
};

}  // namespace avloc
