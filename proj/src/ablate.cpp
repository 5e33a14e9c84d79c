#include "avloc/ablate.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "avloc/checkpoint.hpp"
#include "avloc/error.hpp"
#include "avloc/evaluate.hpp"
#include "avloc/trainer.hpp"

namespace fs = std::filesystem;

namespace avloc {

SweepSpec SweepSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("sweep: cannot open " + path);
  SweepSpec spec;
  spec.loss_combos.clear();
  spec.weight_triples.clear();
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::string rest;
    std::getline(ls, rest);
    std::istringstream items(rest);
    std::string item;
    if (key == "loss_combos") {
      while (std::getline(items, item, ';')) {
        int a, s;
        if (std::sscanf(item.c_str(), "%d ,%d", &a, &s) != 2 &&
            std::sscanf(item.c_str(), "%d,%d", &a, &s) != 2) {
          throw DataError("sweep: bad loss combo '" + item + "'");
        }
        spec.loss_combos.emplace_back(a, s);
      }
    } else if (key == "weight_triples") {
      while (std::getline(items, item, ';')) {
        double a, b, c;
        if (std::sscanf(item.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3) {
          throw DataError("sweep: bad weight triple '" + item + "'");
        }
        spec.weight_triples.push_back({a, b, c});
      }
    } else {
      throw DataError("sweep: unknown key '" + key + "'");
    }
  }
  if (spec.loss_combos.empty() || spec.weight_triples.empty()) throw DataError("sweep: empty sweep");
  return spec;
}

std::vector<AblateRow> run_ablation(const RunConfig& base, const SweepSpec& sweep,
                                    const std::string& data_dir, const std::string& out_dir) {
  if (sweep.loss_combos.empty() || sweep.weight_triples.empty()) throw DataError("ablate: empty sweep");
  fs::create_directories(out_dir);
  Dataset test = load_split((fs::path(data_dir) / "test").string());

  std::vector<AblateRow> rows;
  for (size_t ci = 0; ci < sweep.loss_combos.size(); ++ci) {
    auto [use_avpm, use_sra] = sweep.loss_combos[ci];
    RunConfig cfg = base;
    cfg.lambda1 = use_avpm ? base.lambda1 : 0.0;
    cfg.lambda2 = use_sra ? base.lambda2 : 0.0;
    std::string run_dir = (fs::path(out_dir) / ("combo_" + std::to_string(ci))).string();
    TrainStats stats = train_run(cfg, data_dir, run_dir);
    Checkpoint ck = load_checkpoint(stats.final_checkpoint);

    for (const auto& wt : sweep.weight_triples) {
      FinalMapWeights fw;
      fw.w1 = wt[0];
      fw.w2 = wt[1];
      fw.w3 = wt[2];
      EvalOptions opt;
      opt.act_thresh = base.act_thresh;
      opt.batch_size = base.batch_size;
      EvalReport rep = evaluate_model(ck.model, fw, test, opt);
      AblateRow row;
      row.use_avpm = use_avpm;
      row.use_sra = use_sra;
      row.w1 = wt[0];
      row.w2 = wt[1];
      row.w3 = wt[2];
      row.ciou_half = rep.ciou_at_half;
      row.auc = rep.auc;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_ablation_table(const std::string& path, const std::vector<AblateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("ablate: cannot write " + path);
  out << "use_avpm\tuse_sra\tw1\tw2\tw3\tciou_0.5\tauc\n";
  char buf[200];
  for (const AblateRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%g\t%g\t%g\t%.17g\t%.17g\n", r.use_avpm, r.use_sra, r.w1, r.w2,
                  r.w3, r.ciou_half, r.auc);
    out << buf;
  }
}

}  // namespace avloc
