#include "avloc/evaluate.hpp"

#include <cstdio>
#include <fstream>

#include "avloc/error.hpp"
#include "avloc/trainer.hpp"

namespace avloc {

namespace {

Tensor sample_map(Tape& tape, const Tensor& maps, int b, int H, int W) {
  int h = maps.dim(1), w = maps.dim(2);
  Tensor one = tape.reshape(tape.slice_row(maps, b), {1, h, w});
  Tensor up = tape.bilinear_resize(one, H, W);
  return tape.reshape(up, {H, W});
}

}  // namespace

EvalReport evaluate_model(const Model& model, const FinalMapWeights& weights, const Dataset& test,
                          const EvalOptions& opt) {
  if (test.size() == 0) throw DataError("evaluate: empty test split");
  if (test.image_size != model.cfg.image_size || test.spec_bins != model.cfg.spec_bins ||
      test.spec_frames != model.cfg.spec_frames) {
    throw DataError("evaluate: dataset dims do not match the checkpoint's configuration");
  }
  int H = test.image_size, W = test.image_size;

  std::map<int, std::vector<AnnotBox>> annots;
  if (!opt.annotations_path.empty()) annots = read_annotations(opt.annotations_path, H, W);

  EvalReport rep;
  rep.samples = static_cast<int>(test.size());
  std::vector<double> ciou_final, ciou_mv, ciou_ma, ciou_mvatt;

  int n = static_cast<int>(test.size());
  for (int start = 0; start < n; start += opt.batch_size) {
    int b = std::min(opt.batch_size, n - start);
    std::vector<int> ids(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) ids[static_cast<size_t>(i)] = start + i;
    Tensor images = batch_images(test, ids);
    Tensor specs = batch_specs(test, ids);
    Tape tape(false);
    ForwardOut fwd = model.forward(tape, images, specs, weights);

    for (int i = 0; i < b; ++i) {
      int idx = start + i;
      ConsensusMap gt;
      if (!opt.annotations_path.empty()) {
        auto it = annots.find(idx);
        if (it == annots.end()) throw DataError("evaluate: no annotation for sample " + std::to_string(idx));
        gt = ConsensusMap::from_boxes(it->second, H, W);
      } else {
        gt = ConsensusMap::from_mask(test.masks[static_cast<size_t>(idx)], H, W);
      }
      ciou_final.push_back(ciou(sample_map(tape, fwd.M_final, i, H, W), gt, opt.act_thresh));
      ciou_mv.push_back(ciou(sample_map(tape, fwd.s1.M_v, i, H, W), gt, opt.act_thresh));
      ciou_ma.push_back(ciou(sample_map(tape, fwd.s1.M_a, i, H, W), gt, opt.act_thresh));
      ciou_mvatt.push_back(ciou(sample_map(tape, fwd.s2.M_v_att, i, H, W), gt, opt.act_thresh));
    }
  }

  rep.per_sample = ciou_final;
  rep.ciou_at_half = success_ratio(ciou_final, 0.5);
  rep.auc = success_auc(ciou_final);
  rep.mciou = mciou_from(ciou_final);
  double mean = 0.0;
  for (double v : ciou_final) mean += v;
  rep.mean_ciou = mean / static_cast<double>(ciou_final.size());

  rep.per_map_ciou_half["m_v"] = success_ratio(ciou_mv, 0.5);
  rep.per_map_ciou_half["m_a"] = success_ratio(ciou_ma, 0.5);
  rep.per_map_ciou_half["m_v_att"] = success_ratio(ciou_mvatt, 0.5);
  rep.per_map_ciou_half["m_final"] = rep.ciou_at_half;
  rep.per_map_auc["m_v"] = success_auc(ciou_mv);
  rep.per_map_auc["m_a"] = success_auc(ciou_ma);
  rep.per_map_auc["m_v_att"] = success_auc(ciou_mvatt);
  rep.per_map_auc["m_final"] = rep.auc;
  return rep;
}

void write_report(const std::string& path, const EvalReport& rep, double act_thresh) {
  std::ofstream out(path);
  if (!out) throw DataError("evaluate: cannot write report " + path);
  char buf[256];
  auto kv = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    out << buf;
  };
  out << "avloc-eval v1\n";
  out << "samples = " << rep.samples << "\n";
  kv("act_thresh", act_thresh);
  kv("ciou_0.5", rep.ciou_at_half);
  kv("auc", rep.auc);
  kv("mciou", rep.mciou);
  kv("mean_ciou", rep.mean_ciou);
  for (const char* name : {"m_v", "m_a", "m_v_att", "m_final"}) {
    std::snprintf(buf, sizeof(buf), "ciou_0.5_%s = %.17g\n", name, rep.per_map_ciou_half.at(name));
    out << buf;
    std::snprintf(buf, sizeof(buf), "auc_%s = %.17g\n", name, rep.per_map_auc.at(name));
    out << buf;
  }
  out << "per_sample:\n";
  for (size_t i = 0; i < rep.per_sample.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu %.17g\n", i, rep.per_sample[i]);
    out << buf;
  }
}

}  // namespace avloc
