#include <doctest.h>

#include <cmath>
#include <cstring>

#include "avloc/attention.hpp"
#include "avloc/error.hpp"
#include "avloc/grad_check.hpp"
#include "avloc/losses.hpp"

using namespace avloc;

namespace {

// Plain-loop oracle for the pair matching loss.
double avpm_oracle(const Tensor& lv_att, const Tensor& lv, const Tensor& la, double tau, double delta) {
  int n = lv_att.dim(0), c = lv_att.dim(1);
  auto dist = [&](const Tensor& A, int i, const Tensor& B, int j) {
    double s = 0;
    for (int k = 0; k < c; ++k) {
      double d = (A.at({i, k}) - B.at({j, k})) / tau;
      s += d * d;
    }
    return s;
  };
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      acc += dist(lv_att, i, la, i) + std::max(delta - dist(lv_att, i, la, j), 0.0);
      acc += dist(lv_att, i, lv, i) + std::max(delta - dist(lv_att, i, lv, j), 0.0);
    }
  }
  return acc / (static_cast<double>(n) * (n - 1));
}

LossConfig desk_cfg() {
  LossConfig cfg;
  cfg.tau = 1.0;  // unit temperature keeps hand arithmetic readable
  cfg.delta = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("triplet term floor cases") {
  Tape tp(false);
  Tensor a({2}, {1, 0});
  Tensor far({2}, {0, 1});  // D(a, far) = 2 at tau 1

  // anchor == positive and the negative is beyond the margin
  CHECK(triplet_term(tp, a, a, far, 1.0, 1.0).value() == 0.0);
  // everything coincides: the hinge saturates at the margin
  CHECK(triplet_term(tp, a, a, a, 1.0, 1.0).value() == 1.0);
  CHECK(triplet_term(tp, a, a, a, 1.0, 25.0).value() == 25.0);
  // worked example: 0 + max(1 - 2, 0)
  CHECK(triplet_term(tp, a, a, far, 1.0, 1.0).value() == 0.0);

  CHECK_THROWS_AS(triplet_term(tp, a, a, Tensor({3}), 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(triplet_term(tp, a, a, far, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("avpm: identical rows give 2*delta") {
  Tape tp(false);
  LossConfig cfg = desk_cfg();
  cfg.delta = 25.0;
  Tensor row({3, 2}, {0.6, 0.8, 0.6, 0.8, 0.6, 0.8});
  Tensor loss = avpm_loss(tp, row, row, row, cfg);
  CHECK(loss.value() == doctest::Approx(2 * cfg.delta).epsilon(1e-12));
}

TEST_CASE("avpm matches the plain-loop oracle on random batches") {
  Rng rng(51);
  Tape tp(false);
  for (int trial = 0; trial < 5; ++trial) {
    LossConfig cfg;
    cfg.tau = trial % 2 ? 0.5 : 0.03;
    cfg.delta = trial % 2 ? 3.0 : 25.0;
    Tensor lv_att = random_uniform({4, 3}, rng, -1, 1);
    Tensor lv = random_uniform({4, 3}, rng, -1, 1);
    Tensor la = random_uniform({4, 3}, rng, -1, 1);
    double got = avpm_loss(tp, lv_att, lv, la, cfg).value();
    double want = avpm_oracle(lv_att, lv, la, cfg.tau, cfg.delta);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
    CHECK(got >= 0.0);
  }
}

TEST_CASE("avpm: N=2 orthogonal rows, inactive margins") {
  Tape tp(false);
  LossConfig cfg = desk_cfg();  // delta 1 < D(e_i, e_j) = 2: hinge inactive
  Tensor lv_att({2, 2}, {1, 0, 0, 1});
  Tensor la({2, 2}, {0, 1, 1, 0});  // positives are swapped axes: D = 2
  Tensor lv({2, 2}, {1, 0, 0, 1});  // positives coincide: D = 0
  // per ordered pair: D(a_i, la_i) = 2, hinge(la_j: D=0) = 1; D(a_i, lv_i) = 0,
  // hinge(lv_j: D=2) = 0 -> each pair contributes 3; mean over 2 pairs = 3
  CHECK(avpm_loss(tp, lv_att, lv, la, cfg).value() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("avpm: permutation invariance and the N<2 guard") {
  Rng rng(52);
  Tape tp(false);
  LossConfig cfg;
  Tensor lv_att = random_uniform({5, 4}, rng, -1, 1);
  Tensor lv = random_uniform({5, 4}, rng, -1, 1);
  Tensor la = random_uniform({5, 4}, rng, -1, 1);
  double base = avpm_loss(tp, lv_att, lv, la, cfg).value();

  std::vector<int> perm = {3, 0, 4, 1, 2};
  auto permute = [&](const Tensor& t) {
    Tensor out({5, 4});
    for (int i = 0; i < 5; ++i) {
      for (int k = 0; k < 4; ++k) out.at({i, k}) = t.at({perm[static_cast<size_t>(i)], k});
    }
    return out;
  };
  double shuffled = avpm_loss(tp, permute(lv_att), permute(lv), permute(la), cfg).value();
  CHECK(std::fabs(base - shuffled) < 1e-12);

  Tensor single = random_uniform({1, 4}, rng, -1, 1);
  CHECK(avpm_loss(tp, single, single, single, cfg).value() == 0.0);
}

TEST_CASE("spatial distribution: constant, peaked, and the 1x2 softmax") {
  Tape tp(false);
  Tensor flat = spatial_distribution(tp, Tensor::full({2, 3, 3, 4}, 1.7));
  for (int i = 0; i < flat.size(); ++i) CHECK(flat.data()[i] == doctest::Approx(1.0 / 9).epsilon(1e-12));

  Rng rng(53);
  Tensor F = random_uniform({1, 3, 3, 2}, rng, 0, 0.2);
  for (int c = 0; c < 2; ++c) F.at({0, 1, 2, c}) = 5.0;  // dominant cell (1,2) -> flat index 5
  Tensor dist = spatial_distribution(tp, F);
  int arg = 0;
  for (int i = 1; i < 9; ++i) {
    if (dist.at({0, i}) > dist.at({0, arg})) arg = i;
  }
  CHECK(arg == 5);

  Tensor two({1, 1, 2, 1}, {0.3, 0.9});  // min-max to (0,1)
  Tensor d2 = spatial_distribution(tp, two);
  double e = std::exp(1.0);
  CHECK(d2.at({0, 0}) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-8));
  CHECK(d2.at({0, 1}) == doctest::Approx(e / (1.0 + e)).epsilon(1e-8));
}

TEST_CASE("sra: zero at equality, nonnegative, worked value, detached target") {
  Tape tp(false);
  Tensor p({1, 2}, {0.75, 0.25});
  Tensor q({1, 2}, {0.5, 0.5});
  double want = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(sra_loss(tp, p, q).value() == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(0.13081).epsilon(1e-4));
  CHECK(sra_loss(tp, p, p).value() == doctest::Approx(0.0).epsilon(1e-15));

  Rng rng(54);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor a = tp.softmax(random_uniform({2, 6}, rng, -2, 2));
    Tensor b = tp.softmax(random_uniform({2, 6}, rng, -2, 2));
    CHECK(sra_loss(tp, a, b).value() >= 0.0);
  }

  CHECK_THROWS_AS(sra_loss(tp, Tensor({1, 2}, {1.0, 0.0}), q), NumericError);

  // gradient flows into the audio side only
  Tape rec;
  Tensor F_att = rec.watch(random_uniform({2, 3, 3, 2}, rng, -1, 1));
  Tensor F_a = rec.watch(random_uniform({2, 3, 3, 2}, rng, -1, 1));
  Tensor loss = sra_loss(rec, spatial_distribution(rec, F_att), spatial_distribution(rec, F_a));
  Gradients g = rec.backward(loss);
  Tensor g_att = g.at(F_att);
  Tensor g_a = g.at(F_a);
  double att_norm = 0, a_norm = 0;
  for (int i = 0; i < g_att.size(); ++i) att_norm += std::fabs(g_att.data()[i]);
  for (int i = 0; i < g_a.size(); ++i) a_norm += std::fabs(g_a.data()[i]);
  CHECK(att_norm == 0.0);
  CHECK(a_norm > 0.0);
}

TEST_CASE("ssl: equal responses cost ln 2, dominant positive approaches 0") {
  Tape tp(false);
  LossConfig cfg;

  // two identical samples with spatially constant features: every pooled
  // response equals the same cosine
  Tensor F({2, 2, 2, 2});
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 4; ++i) {
      F.data()[s * 8 + i * 2 + 0] = 0.6;
      F.data()[s * 8 + i * 2 + 1] = 0.8;
    }
  }
  Tensor l({2, 2}, {0.6, 0.8, 0.6, 0.8});
  Tensor S = similarity_map(tp, F, l);
  CHECK(ssl_loss(tp, F, l, S, cfg).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // orthogonal pairs: own response 1, cross response 0
  Tensor F2({2, 2, 2, 2});
  for (int i = 0; i < 4; ++i) {
    F2.data()[0 * 8 + i * 2 + 0] = 1.0;  // sample 0 cells = e1
    F2.data()[1 * 8 + i * 2 + 1] = 1.0;  // sample 1 cells = e2
  }
  Tensor l2({2, 2}, {1, 0, 0, 1});
  Tensor S2 = similarity_map(tp, F2, l2);
  CHECK(ssl_loss(tp, F2, l2, S2, cfg).value() < 0.01);

  CHECK_THROWS_AS(ssl_loss(tp, Tensor({1, 2, 2, 2}), Tensor({1, 2}), Tensor({1, 2, 2}), cfg),
                  std::invalid_argument);
}

TEST_CASE("total loss: ablation identity, worked sum, finiteness, monotonicity") {
  Tape tp(false);
  LossConfig cfg;
  Tensor ssl = Tensor::scalar(1.0), avpm = Tensor::scalar(2.0), sra = Tensor::scalar(0.5);

  LossConfig off = cfg;
  off.lambda1 = 0;
  off.lambda2 = 0;
  CHECK(total_loss(tp, ssl, avpm, sra, off).value() == 1.0);

  // paper defaults lambda1=1, lambda2=10
  CHECK(total_loss(tp, ssl, avpm, sra, cfg).value() == doctest::Approx(8.0).epsilon(1e-15));

  LossConfig bigger = cfg;
  bigger.lambda2 = 20;
  CHECK(total_loss(tp, ssl, avpm, sra, bigger).value() > total_loss(tp, ssl, avpm, sra, cfg).value());

  Tensor bad = Tensor::scalar(std::nan(""));
  CHECK_THROWS_WITH_AS(total_loss(tp, ssl, bad, sra, cfg), doctest::Contains("L_avpm"), NumericError);
  CHECK_THROWS_WITH_AS(total_loss(tp, bad, avpm, sra, cfg), doctest::Contains("L_SSL"), NumericError);
}

TEST_CASE("loss gradient suite: 10 random micro-batches, N=3 h=w=3 c=4") {
  const double kStep = 1e-5, kTol = 1e-4;
  Rng rng(55);
  LossConfig cfg;  // paper values: tau 0.03, delta 25, thresholds as configured
  for (int trial = 0; trial < 10; ++trial) {
    Tensor lv_att = random_uniform({3, 4}, rng, -1, 1);
    Tensor lv = random_uniform({3, 4}, rng, -1, 1);
    Tensor la = random_uniform({3, 4}, rng, -1, 1);
    CHECK(grad_check_multi(
              [&cfg](Tape& tp, const std::vector<Tensor>& xs) {
                return avpm_loss(tp, xs[0], xs[1], xs[2], cfg);
              },
              {lv_att, lv, la}, kStep) < kTol);

    Tensor F_att = random_uniform({3, 3, 3, 4}, rng, -1, 1);
    Tensor F_a = random_uniform({3, 3, 3, 4}, rng, -1, 1);
    CHECK(grad_check(
              [&F_att](Tape& tp, const Tensor& x) {
                return sra_loss(tp, spatial_distribution(tp, F_att), spatial_distribution(tp, x));
              },
              F_a, kStep) < kTol);

    Tensor F_v = random_uniform({3, 3, 3, 4}, rng, -1, 1);
    Tensor l_a = random_uniform({3, 4}, rng, -1, 1);
    CHECK(grad_check_multi(
              [&cfg](Tape& tp, const std::vector<Tensor>& xs) {
                Tensor S = similarity_map(tp, xs[0], xs[1]);
                return ssl_loss(tp, xs[0], xs[1], S, cfg);
              },
              {F_v, l_a}, kStep) < kTol);

    // The full weighted objective as one function of the raw loss inputs.
    // The alignment target is stop-gradient by design, so the difference
    // oracle must hold it at its base-point value.
    Tensor frozen_target;
    {
      Tape base(false);
      frozen_target = spatial_distribution(base, F_att).detached();
    }
    CHECK(grad_check_multi(
              [&cfg, &frozen_target](Tape& tp, const std::vector<Tensor>& xs) {
                Tensor S = similarity_map(tp, xs[0], xs[1]);
                Tensor ssl = ssl_loss(tp, xs[0], xs[1], S, cfg);
                Tensor avpm = avpm_loss(tp, xs[2], xs[3], xs[1], cfg);
                Tensor sra = sra_loss(tp, frozen_target, spatial_distribution(tp, xs[0]));
                return total_loss(tp, ssl, avpm, sra, cfg);
              },
              {F_v, l_a, lv_att, lv}, kStep) < kTol);
  }
}
