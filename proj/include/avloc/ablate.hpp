#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "avloc/config.hpp"

namespace avloc {

struct AblateRow {
  int use_avpm = 0, use_sra = 0;
  double w1 = 1, w2 = 1, w3 = 1;
  double ciou_half = 0, auc = 0;
};

struct SweepSpec {
  // (use_avpm, use_sra) pairs; flags scale lambda1/lambda2 on or off
  std::vector<std::pair<int, int>> loss_combos = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::vector<std::array<double, 3>> weight_triples = {{1, 1, 4}, {1, 1, 2}, {1, 1, 1},
                                                       {1, 2, 1}, {2, 1, 1}, {2, 2, 1}};
  static SweepSpec from_file(const std::string& path);
};

// Trains one model per loss combination, then evaluates each under every
// weight triple: |combos| x |triples| rows.
std::vector<AblateRow> run_ablation(const RunConfig& base, const SweepSpec& sweep,
                                    const std::string& data_dir, const std::string& out_dir);

void write_ablation_table(const std::string& path, const std::vector<AblateRow>& rows);

}  // namespace avloc
