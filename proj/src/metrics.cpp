#include "avloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "avloc/error.hpp"

namespace avloc {

ConsensusMap ConsensusMap::from_boxes(const std::vector<AnnotBox>& boxes, int H, int W) {
  if (boxes.empty()) throw std::invalid_argument("consensus_map: empty box list");
  if (H <= 0 || W <= 0) throw std::invalid_argument("consensus_map: nonpositive dims");
  std::set<int> annotators;
  for (const AnnotBox& b : boxes) {
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > W || b.y1 > H || b.x0 >= b.x1 || b.y0 >= b.y1) {
      throw std::invalid_argument("consensus_map: box (" + std::to_string(b.x0) + "," + std::to_string(b.y0) +
                                  "," + std::to_string(b.x1) + "," + std::to_string(b.y1) +
                                  ") outside image " + std::to_string(W) + "x" + std::to_string(H));
    }
    annotators.insert(b.annotator);
  }
  ConsensusMap m;
  m.H = H;
  m.W = W;
  m.weights.assign(static_cast<size_t>(H) * W, 0.0);
  double total = static_cast<double>(annotators.size());
  for (int a : annotators) {
    // union of this annotator's boxes counts once per pixel
    std::vector<uint8_t> covered(static_cast<size_t>(H) * W, 0);
    for (const AnnotBox& b : boxes) {
      if (b.annotator != a) continue;
      for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) covered[static_cast<size_t>(y) * W + x] = 1;
      }
    }
    for (size_t i = 0; i < covered.size(); ++i) {
      if (covered[i]) m.weights[i] += 1.0 / total;
    }
  }
  return m;
}

ConsensusMap ConsensusMap::from_mask(const std::vector<uint8_t>& mask, int H, int W) {
  if (static_cast<int>(mask.size()) != H * W) {
    throw std::invalid_argument("consensus_map: mask size " + std::to_string(mask.size()) + " vs " +
                                std::to_string(H) + "x" + std::to_string(W));
  }
  ConsensusMap m;
  m.H = H;
  m.W = W;
  m.weights.assign(mask.size(), 0.0);
  for (size_t i = 0; i < mask.size(); ++i) m.weights[i] = mask[i] ? 1.0 : 0.0;
  return m;
}

double ConsensusMap::weight_sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double ciou(const Tensor& pred, const ConsensusMap& gt, double act_thresh) {
  if (pred.rank() != 2 || pred.dim(0) != gt.H || pred.dim(1) != gt.W) {
    throw std::invalid_argument("ciou: prediction " + shape_str(pred.shape()) + " vs consensus " +
                                std::to_string(gt.H) + "x" + std::to_string(gt.W));
  }
  if (!(act_thresh > 0.0 && act_thresh < 1.0)) throw std::invalid_argument("ciou: act_thresh must be in (0,1)");
  double mx = 0.0;
  for (int i = 0; i < pred.size(); ++i) mx = std::max(mx, pred.data()[i]);
  if (mx <= 0.0) {
    std::cerr << "[avloc] warning: ciou on an all-zero prediction map\n";
    return 0.0;
  }
  double cut = act_thresh * mx;
  double inter = 0.0;
  long false_area = 0;
  for (int i = 0; i < pred.size(); ++i) {
    if (pred.data()[i] >= cut) {
      double g = gt.weights[static_cast<size_t>(i)];
      if (g > 0.0) {
        inter += g;
      } else {
        ++false_area;
      }
    }
  }
  double denom = gt.weight_sum() + static_cast<double>(false_area);
  return denom > 0.0 ? inter / denom : 0.0;
}

double success_ratio(const std::vector<double>& cious, double threshold) {
  if (cious.empty()) throw std::invalid_argument("success_ratio: empty sample list");
  int hits = 0;
  for (double v : cious) {
    if (v >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cious.size());
}

double success_auc(const std::vector<double>& cious) {
  if (cious.empty()) throw std::invalid_argument("success_auc: empty sample list");
  for (double v : cious) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("success_auc: cIoU outside [0,1]");
  }
  double area = 0.0;
  double prev = success_ratio(cious, 0.0);
  for (int k = 1; k <= 20; ++k) {
    double cur = success_ratio(cious, 0.05 * k);
    area += 0.5 * (prev + cur) * 0.05;
    prev = cur;
  }
  return area;
}

double mciou_from(const std::vector<double>& cious) {
  if (cious.empty()) throw std::invalid_argument("mciou: empty sample list");
  double acc = 0.0;
  for (int k = 0; k < 10; ++k) acc += success_ratio(cious, 0.5 + 0.05 * k);
  return acc / 10.0;
}

double mciou(const std::vector<Tensor>& preds, const std::vector<ConsensusMap>& gts, double act_thresh) {
  if (preds.empty() || preds.size() != gts.size()) {
    throw std::invalid_argument("mciou: prediction and annotation sets must align and be nonempty");
  }
  std::vector<double> cious;
  cious.reserve(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) cious.push_back(ciou(preds[i], gts[i], act_thresh));
  return mciou_from(cious);
}

std::map<int, std::vector<AnnotBox>> read_annotations(const std::string& path, int H, int W) {
  std::ifstream in(path);
  if (!in) throw DataError("annotations: cannot open " + path);
  std::map<int, std::vector<AnnotBox>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    int idx;
    AnnotBox b;
    if (!(ls >> idx)) continue;  // blank or comment-only line
    if (!(ls >> b.annotator >> b.x0 >> b.y0 >> b.x1 >> b.y1)) {
      throw DataError("annotations: malformed line " + std::to_string(lineno) + " in " + path);
    }
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > W || b.y1 > H || b.x0 >= b.x1 || b.y0 >= b.y1) {
      throw DataError("annotations: box outside " + std::to_string(W) + "x" + std::to_string(H) +
                      " at line " + std::to_string(lineno));
    }
    out[idx].push_back(b);
  }
  return out;
}

void write_annotations(const std::string& path, const std::map<int, std::vector<AnnotBox>>& boxes) {
  std::ofstream out(path);
  if (!out) throw DataError("annotations: cannot write " + path);
  out << "# sample_index annotator x0 y0 x1 y1 (half-open pixel boxes)\n";
  for (const auto& [idx, list] : boxes) {
    for (const AnnotBox& b : list) {
      out << idx << " " << b.annotator << " " << b.x0 << " " << b.y0 << " " << b.x1 << " " << b.y1 << "\n";
    }
  }
}

}  // namespace avloc
