#include <doctest.h>

#include <cmath>
#include <cstring>

#include "avloc/attention.hpp"
#include "avloc/grad_check.hpp"

using namespace avloc;

namespace {

int argmax(const double* v, int n) {
  int a = 0;
  for (int i = 1; i < n; ++i) {
    if (v[i] > v[a]) a = i;
  }
  return a;
}

}  // namespace

TEST_CASE("similarity map: features equal to the query give a uniform map") {
  Tape tp(false);
  Tensor F = Tensor::full({1, 2, 3, 2}, 0.0);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 3; ++x) {
      F.at({0, y, x, 0}) = 0.8;
      F.at({0, y, x, 1}) = 0.6;
    }
  }
  Tensor l({1, 2}, {0.8, 0.6});
  Tensor S = similarity_map(tp, F, l);
  for (int i = 0; i < 6; ++i) CHECK(S.data()[i] == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("similarity map: cosines (1,0) normalize to (1,0)") {
  Tape tp(false);
  Tensor F({1, 1, 2, 2}, {1, 0, 0, 1});  // cell0 parallel to l, cell1 orthogonal
  Tensor l({1, 2}, {1, 0});
  Tensor S = similarity_map(tp, F, l);
  CHECK(S.at({0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(S.at({0, 0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("similarity map: all-zero cosine sum falls back to uniform") {
  Tape tp(false);
  Tensor F({1, 1, 2, 2}, {0, 1, 0, -1});  // both cells orthogonal to l
  Tensor l({1, 2}, {1, 0});
  Tensor S = similarity_map(tp, F, l);
  CHECK(S.at({0, 0, 0}) == 0.5);
  CHECK(S.at({0, 0, 1}) == 0.5);
}

TEST_CASE("similarity map rejects channel mismatch") {
  Tape tp(false);
  CHECK_THROWS_AS(similarity_map(tp, Tensor({1, 2, 2, 3}), Tensor({1, 4})), std::invalid_argument);
}

TEST_CASE("cosine scale invariance: power-of-two rescaling is bit-exact") {
  Rng rng(21);
  Tensor F = random_uniform({2, 3, 3, 4}, rng, -1, 1);
  Tensor l = random_uniform({2, 4}, rng, -1, 1);
  Tape tp(false);
  Tensor S = similarity_map(tp, F, l);
  Tensor F2 = F.detached();
  Tensor l2 = l.detached();
  for (int i = 0; i < F2.size(); ++i) F2.data()[i] *= 4.0;
  for (int i = 0; i < l2.size(); ++i) l2.data()[i] *= 0.5;
  Tensor S2 = similarity_map(tp, F2, l2);
  CHECK(std::memcmp(S.data(), S2.data(), static_cast<size_t>(S.size()) * 8) == 0);

  // arbitrary positive scales agree to round-off
  Tensor F3 = F.detached();
  for (int i = 0; i < F3.size(); ++i) F3.data()[i] *= 3.7;
  Tensor S3 = similarity_map(tp, F3, l);
  for (int i = 0; i < S.size(); ++i) CHECK(S3.data()[i] == doctest::Approx(S.data()[i]).epsilon(1e-12));
}

TEST_CASE("softmax map: uniform stays uniform, argmax is preserved, scalar case") {
  Tape tp(false);
  Tensor U = Tensor::full({2, 3, 3}, 0.1111);
  Tensor MU = softmax_map(tp, U, 1.0);
  for (int i = 0; i < MU.size(); ++i) CHECK(MU.data()[i] == doctest::Approx(1.0 / 9).epsilon(1e-12));

  Rng rng(22);
  Tensor S = random_uniform({3, 4, 5}, rng, -1, 1);
  Tensor M = softmax_map(tp, S, 0.5);
  for (int s = 0; s < 3; ++s) {
    CHECK(argmax(S.data() + s * 20, 20) == argmax(M.data() + s * 20, 20));
    double sum = 0;
    for (int i = 0; i < 20; ++i) sum += M.data()[s * 20 + i];
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  // S=(0, ln 2) at temperature 1 -> (1/3, 2/3)
  Tensor P({1, 1, 2}, {0.0, std::log(2.0)});
  Tensor MP = softmax_map(tp, P, 1.0);
  CHECK(MP.at({0, 0, 0}) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(MP.at({0, 0, 1}) == doctest::Approx(2.0 / 3).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_map(tp, U, 0.0), std::invalid_argument);
}

TEST_CASE("min-max normalization examples") {
  Tape tp(false);
  Tensor ramp({1, 1, 11, 1});
  for (int i = 0; i <= 10; ++i) ramp.data()[i] = i;
  Tensor r = minmax_normalize(tp, ramp);
  for (int i = 0; i <= 10; ++i) CHECK(r.data()[i] == doctest::Approx(i / 10.0).epsilon(1e-8));

  Tensor c = minmax_normalize(tp, Tensor::full({2, 2, 2, 1}, 3.25));
  for (int i = 0; i < c.size(); ++i) CHECK(c.data()[i] == 0.0);

  Tensor v({1, 1, 3, 1}, {2, 4, 6});
  Tensor rv = minmax_normalize(tp, v);
  CHECK(rv.data()[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(rv.data()[1] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(rv.data()[2] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("feature fusion: identity, annihilation, elementwise") {
  Tape tp(false);
  Rng rng(23);
  Tensor F = random_uniform({1, 2, 2, 2}, rng, -1, 1);
  Tensor ones = Tensor::full({1, 2, 2, 2}, 1.0);
  Tensor fused = fuse_features(tp, F, ones);
  CHECK(std::memcmp(F.data(), fused.data(), static_cast<size_t>(F.size()) * 8) == 0);

  Tensor zeros({1, 2, 2, 2});
  Tensor dead = fuse_features(tp, F, zeros);
  for (int i = 0; i < dead.size(); ++i) CHECK(dead.data()[i] == 0.0);

  Tensor a({1, 1, 1, 2}, {2, 3});
  Tensor b({1, 1, 1, 2}, {0.5, 1});
  Tensor ab = fuse_features(tp, a, b);
  CHECK(ab.data()[0] == 1.0);
  CHECK(ab.data()[1] == 3.0);

  CHECK_THROWS_AS(fuse_features(tp, F, Tensor({1, 2, 2, 3})), std::invalid_argument);
}

TEST_CASE("map integration: idempotent, symmetric, elementwise mean") {
  Tape tp(false);
  Rng rng(24);
  Tensor Mv = softmax_map(tp, random_uniform({2, 3, 3}, rng, -1, 1), 1.0);
  Tensor Ma = softmax_map(tp, random_uniform({2, 3, 3}, rng, -1, 1), 1.0);
  Tensor same = integrate_maps(tp, Mv, Mv);
  for (int i = 0; i < Mv.size(); ++i) CHECK(same.data()[i] == doctest::Approx(Mv.data()[i]).epsilon(1e-15));

  Tensor ab = integrate_maps(tp, Mv, Ma);
  Tensor ba = integrate_maps(tp, Ma, Mv);
  CHECK(std::memcmp(ab.data(), ba.data(), static_cast<size_t>(ab.size()) * 8) == 0);
  for (int s = 0; s < 2; ++s) {
    double sum = 0;
    for (int i = 0; i < 9; ++i) sum += ab.data()[s * 9 + i];
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  Tensor x({1, 1, 2}, {0.9, 0.1});
  Tensor y({1, 1, 2}, {0.5, 0.5});
  Tensor m = integrate_maps(tp, x, y);
  CHECK(m.data()[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(m.data()[1] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("uniform positive fusion leaves the localization map unchanged") {
  // a spatially and channel-wise constant gate rescales F_v uniformly, and
  // the cosine similarity is scale invariant
  Rng rng(25);
  Tensor F = random_uniform({2, 3, 3, 4}, rng, -1, 1);
  Tensor l = random_uniform({2, 4}, rng, -1, 1);
  Tape tp(false);
  Tensor gate = Tensor::full({2, 3, 3, 4}, 0.5);
  Tensor M_from_fused = softmax_map(tp, similarity_map(tp, fuse_features(tp, F, gate), l), 1.0);
  Tensor M_direct = softmax_map(tp, similarity_map(tp, F, l), 1.0);
  CHECK(std::memcmp(M_from_fused.data(), M_direct.data(), static_cast<size_t>(M_direct.size()) * 8) == 0);
}

TEST_CASE("stage 1 contracts: shapes, normalization, gradients") {
  EncoderConfig vc;
  vc.in_channels = 3;
  vc.width = 4;
  vc.grid = 4;
  EncoderConfig ac = vc;
  ac.in_channels = 1;
  Rng rng(26);
  EncoderWeights visual = EncoderWeights::init(vc, rng);
  EncoderWeights audio = EncoderWeights::init(ac, rng);
  Tensor images = random_uniform({2, 16, 16, 3}, rng, 0, 1);
  Tensor specs = random_uniform({2, 16, 16, 1}, rng, -2, 1);

  Tape tp(false);
  Stage1Out out = stage1_forward(tp, images, specs, visual, audio, 1.0);
  CHECK(out.M_v.shape() == std::vector<int>{2, 4, 4});
  CHECK(out.M_a.shape() == std::vector<int>{2, 4, 4});
  CHECK(out.M_av.shape() == std::vector<int>{2, 4, 4});
  for (const Tensor* m : {&out.M_v, &out.M_a, &out.M_av}) {
    for (int s = 0; s < 2; ++s) {
      double sum = 0;
      for (int i = 0; i < 16; ++i) {
        CHECK(m->data()[s * 16 + i] > 0.0);
        sum += m->data()[s * 16 + i];
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }

  double err = grad_check_multi(
      [&](Tape& t, const std::vector<Tensor>& xs) {
        Stage1Out o = stage1_forward(t, xs[0], xs[1], visual, audio, 1.0);
        return t.sum_all(t.mul(o.M_av, o.M_av));
      },
      {images, specs}, 1e-5, 40, 77);
  CHECK(err < 1e-4);
}
