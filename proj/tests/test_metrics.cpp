#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "avloc/error.hpp"
#include "avloc/metrics.hpp"
#include "avloc/rng.hpp"

using namespace avloc;

namespace {

// Brute-force pixel-set oracle: explicit activated set, weighted
// intersection, false-positive count, one division at the end.
double ciou_oracle(const Tensor& pred, const ConsensusMap& gt, double act_thresh) {
  double mx = 0;
  for (int i = 0; i < pred.size(); ++i) mx = std::max(mx, pred.data()[i]);
  if (mx <= 0) return 0.0;
  std::set<int> activated;
  for (int i = 0; i < pred.size(); ++i) {
    if (pred.data()[i] >= act_thresh * mx) activated.insert(i);
  }
  double inter = 0;
  long falses = 0;
  for (int p : activated) {
    if (gt.weights[static_cast<size_t>(p)] > 0) {
      inter += gt.weights[static_cast<size_t>(p)];
    } else {
      ++falses;
    }
  }
  double gsum = 0;
  for (double w : gt.weights) gsum += w;
  return inter / (gsum + static_cast<double>(falses));
}

double auc_oracle(const std::vector<double>& cious) {
  auto ratio = [&](double t) {
    int hits = 0;
    for (double v : cious) hits += v >= t ? 1 : 0;
    return static_cast<double>(hits) / cious.size();
  };
  double area = 0;
  for (int k = 1; k <= 20; ++k) area += 0.5 * (ratio(0.05 * (k - 1)) + ratio(0.05 * k)) * 0.05;
  return area;
}

double mciou_oracle(const std::vector<double>& cious) {
  double acc = 0;
  for (int k = 0; k < 10; ++k) {
    double t = 0.5 + 0.05 * k;
    int hits = 0;
    for (double v : cious) hits += v >= t ? 1 : 0;
    acc += static_cast<double>(hits) / cious.size();
  }
  return acc / 10;
}

ConsensusMap random_consensus(Rng& rng, int H, int W) {
  std::vector<AnnotBox> boxes;
  int annotators = 1 + rng.below(3);
  for (int a = 0; a < annotators; ++a) {
    int x0 = rng.below(W - 4), y0 = rng.below(H - 4);
    int x1 = x0 + 2 + rng.below(W - x0 - 2), y1 = y0 + 2 + rng.below(H - y0 - 2);
    boxes.push_back({a, x0, y0, x1, y1});
  }
  return ConsensusMap::from_boxes(boxes, H, W);
}

}  // namespace

TEST_CASE("consensus map from boxes") {
  ConsensusMap one = ConsensusMap::from_boxes({{0, 2, 2, 6, 6}}, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double want = (x >= 2 && x < 6 && y >= 2 && y < 6) ? 1.0 : 0.0;
      CHECK(one.weights[static_cast<size_t>(y) * 8 + x] == want);
    }
  }

  // identical boxes from two annotators weigh the same as one
  ConsensusMap two = ConsensusMap::from_boxes({{0, 2, 2, 6, 6}, {1, 2, 2, 6, 6}}, 8, 8);
  CHECK(two.weights == one.weights);

  // half-overlapping boxes: 1.0 in the overlap, 0.5 elsewhere
  ConsensusMap half = ConsensusMap::from_boxes({{0, 0, 0, 4, 4}, {1, 2, 0, 6, 4}}, 8, 8);
  CHECK(half.weights[0 * 8 + 1] == 0.5);
  CHECK(half.weights[1 * 8 + 3] == 1.0);
  CHECK(half.weights[1 * 8 + 5] == 0.5);
  CHECK(half.weights[1 * 8 + 7] == 0.0);

  CHECK_THROWS_AS(ConsensusMap::from_boxes({}, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(ConsensusMap::from_boxes({{0, -1, 0, 4, 4}}, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(ConsensusMap::from_boxes({{0, 4, 0, 4, 4}}, 8, 8), std::invalid_argument);
}

TEST_CASE("ciou: perfect, disjoint, mask-as-prediction") {
  ConsensusMap gt = ConsensusMap::from_boxes({{0, 2, 2, 6, 6}}, 8, 8);
  Tensor perfect({8, 8});
  for (int y = 2; y < 6; ++y) {
    for (int x = 2; x < 6; ++x) perfect.at({y, x}) = 1.0;
  }
  CHECK(ciou(perfect, gt) == 1.0);

  Tensor disjoint({8, 8});
  disjoint.at({0, 0}) = 1.0;
  CHECK(ciou(disjoint, gt) == 0.0);

  Tensor blank({8, 8});
  CHECK(ciou(blank, gt) == 0.0);

  CHECK_THROWS_AS(ciou(Tensor({4, 4}), gt), std::invalid_argument);
  CHECK_THROWS_AS(ciou(perfect, gt, 1.5), std::invalid_argument);
}

TEST_CASE("ciou equals the pixel-counting oracle on 100 random instances") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    ConsensusMap gt = random_consensus(rng, 16, 16);
    Tensor pred = random_uniform({16, 16}, rng, 0, 1);
    double got = ciou(pred, gt, 0.5);
    double want = ciou_oracle(pred, gt, 0.5);
    CHECK(got == want);  // exact: same pixel counts, one division
  }
}

TEST_CASE("ciou is invariant to positive rescaling of the prediction") {
  Rng rng(62);
  for (int trial = 0; trial < 25; ++trial) {
    ConsensusMap gt = random_consensus(rng, 16, 16);
    Tensor pred = random_uniform({16, 16}, rng, 0, 1);
    double base = ciou(pred, gt, 0.5);
    for (double scale : {1e-3, 1.0, 1e3}) {
      Tensor scaled = pred.detached();
      for (int i = 0; i < scaled.size(); ++i) scaled.data()[i] *= scale;
      CHECK(ciou(scaled, gt, 0.5) == base);
    }
  }
}

TEST_CASE("auc: floor, ceiling, hand-summed trapezoids") {
  std::vector<double> ones(5, 1.0);
  CHECK(success_auc(ones) == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<double> zeros(5, 0.0);
  // success only at t=0: the first trapezoid contributes (1+0)/2 * 0.05
  CHECK(success_auc(zeros) == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(success_auc(zeros) == doctest::Approx(auc_oracle(zeros)).epsilon(1e-15));

  std::vector<double> pair = {0.4, 0.8};
  CHECK(success_auc(pair) == doctest::Approx(auc_oracle(pair)).epsilon(1e-15));

  Rng rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> vals;
    for (int i = 0; i < 9; ++i) vals.push_back(rng.uniform());
    CHECK(std::fabs(success_auc(vals) - auc_oracle(vals)) < 1e-12);
  }
  CHECK_THROWS_AS(success_auc({}), std::invalid_argument);
  CHECK_THROWS_AS(success_auc({1.2}), std::invalid_argument);
}

TEST_CASE("mciou: ceiling, below-threshold floor, sweep oracle") {
  std::vector<double> ones(4, 1.0);
  CHECK(mciou_from(ones) == 1.0);
  std::vector<double> low(4, 0.49);
  CHECK(mciou_from(low) == 0.0);

  Rng rng(64);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> vals;
    for (int i = 0; i < 11; ++i) vals.push_back(rng.uniform());
    CHECK(std::fabs(mciou_from(vals) - mciou_oracle(vals)) < 1e-12);
  }

  // the aligned-set overload agrees with computing cious first
  std::vector<Tensor> preds;
  std::vector<ConsensusMap> gts;
  std::vector<double> cious;
  for (int i = 0; i < 6; ++i) {
    gts.push_back(random_consensus(rng, 16, 16));
    preds.push_back(random_uniform({16, 16}, rng, 0, 1));
    cious.push_back(ciou(preds.back(), gts.back(), 0.5));
  }
  CHECK(mciou(preds, gts, 0.5) == mciou_from(cious));
  CHECK_THROWS_AS(mciou({}, {}, 0.5), std::invalid_argument);
}

TEST_CASE("metrics stay in [0,1]; adding a perfect sample never hurts") {
  Rng rng(65);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> vals;
    for (int i = 0; i < 7; ++i) vals.push_back(rng.uniform());
    double auc0 = success_auc(vals), m0 = mciou_from(vals);
    CHECK(auc0 >= 0.0);
    CHECK(auc0 <= 1.0);
    CHECK(m0 >= 0.0);
    CHECK(m0 <= 1.0);
    vals.push_back(1.0);
    CHECK(success_auc(vals) >= auc0 - 1e-15);
    CHECK(mciou_from(vals) >= m0 - 1e-15);
  }
}

TEST_CASE("annotation files round-trip and validate") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "avloc_annot_test";
  fs::create_directories(dir);
  std::string path = (dir / "boxes.txt").string();

  std::map<int, std::vector<AnnotBox>> boxes;
  boxes[0] = {{0, 1, 2, 5, 6}, {1, 0, 0, 3, 3}};
  boxes[3] = {{0, 4, 4, 8, 8}};
  write_annotations(path, boxes);
  auto back = read_annotations(path, 8, 8);
  REQUIRE(back.size() == 2);
  CHECK(back[0].size() == 2);
  CHECK(back[3].size() == 1);
  CHECK(back[0][0].x1 == 5);
  CHECK(back[3][0].annotator == 0);

  CHECK_THROWS_AS(read_annotations(path, 4, 4), DataError);  // boxes exceed 4x4
  CHECK_THROWS_AS(read_annotations((dir / "missing.txt").string(), 8, 8), DataError);
  fs::remove_all(dir);
}
