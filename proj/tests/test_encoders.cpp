#include <doctest.h>

#include <cmath>
#include <cstring>

#include "avloc/encoders.hpp"
#include "avloc/grad_check.hpp"

using namespace avloc;

namespace {

std::vector<double> sine_wave(double freq, int sample_rate, int len, double amp = 0.8) {
  std::vector<double> w(static_cast<size_t>(len));
  for (int t = 0; t < len; ++t) w[static_cast<size_t>(t)] = amp * std::sin(2.0 * M_PI * freq * t / sample_rate);
  return w;
}

EncoderWeights small_encoder(int in_channels, int width, int grid, uint64_t seed) {
  EncoderConfig cfg;
  cfg.in_channels = in_channels;
  cfg.width = width;
  cfg.grid = grid;
  Rng rng(seed);
  return EncoderWeights::init(cfg, rng);
}

}  // namespace

TEST_CASE("spectrogram of silence is the log floor everywhere") {
  std::vector<double> wave(512, 0.0);
  Tensor s = make_spectrogram(wave, 8000, 128, 64);
  double floor_db = std::log(1e-10);
  for (int i = 0; i < s.size(); ++i) CHECK(s.data()[i] == doctest::Approx(floor_db).epsilon(1e-12));
}

TEST_CASE("bin-center sine dominates its frequency row") {
  int sr = 8000, window = 128, hop = 64;
  int bin = 11;
  double freq = static_cast<double>(bin) * sr / window;
  Tensor s = make_spectrogram(sine_wave(freq, sr, 1024), sr, window, hop);
  int bins = s.dim(1), frames = s.dim(2);
  REQUIRE(bins == 65);
  for (int fr = 0; fr < frames; ++fr) {
    int arg = 0;
    for (int b = 1; b < bins; ++b) {
      if (s.at({0, b, fr, 0}) > s.at({0, arg, fr, 0})) arg = b;
    }
    CHECK(arg == bin);
  }
}

TEST_CASE("spectrogram is deterministic and rejects short input") {
  std::vector<double> wave = sine_wave(500, 8000, 700);
  Tensor a = make_spectrogram(wave, 8000, 128, 64);
  Tensor b = make_spectrogram(wave, 8000, 128, 64);
  CHECK(std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * 8) == 0);
  CHECK_THROWS_AS(make_spectrogram(std::vector<double>(100, 0.1), 8000, 128, 64), std::invalid_argument);
  CHECK_THROWS_AS(make_spectrogram(wave, 8000, 32, 64), std::invalid_argument);  // hop > window
}

TEST_CASE("visual encoder obeys the shape contract") {
  EncoderWeights w = small_encoder(3, 8, 7, 1);
  Rng rng(2);
  Tensor images = random_uniform({2, 32, 32, 3}, rng, 0, 1);
  Tape tp(false);
  Tensor f = encode_visual(tp, w, images);
  CHECK(f.shape() == std::vector<int>{2, 7, 7, 8});
  CHECK(f.all_finite());
  CHECK_THROWS_AS(encode_visual(tp, w, random_uniform({1, 16, 16, 1}, rng, 0, 1)), std::invalid_argument);
}

TEST_CASE("identical images give identical features; batch order only permutes") {
  EncoderWeights w = small_encoder(3, 6, 4, 3);
  Rng rng(4);
  Tensor one = random_uniform({1, 16, 16, 3}, rng, 0, 1);
  Tensor two({2, 16, 16, 3});
  std::memcpy(two.data(), one.data(), static_cast<size_t>(one.size()) * 8);
  std::memcpy(two.data() + one.size(), one.data(), static_cast<size_t>(one.size()) * 8);
  Tape tp(false);
  Tensor f = encode_visual(tp, w, two);
  int half = f.size() / 2;
  CHECK(std::memcmp(f.data(), f.data() + half, static_cast<size_t>(half) * 8) == 0);

  // no cross-sample leakage: swapping the batch swaps the outputs bit-exactly
  Tensor a = random_uniform({1, 16, 16, 3}, rng, 0, 1);
  Tensor b = random_uniform({1, 16, 16, 3}, rng, 0, 1);
  Tensor ab({2, 16, 16, 3}), ba({2, 16, 16, 3});
  std::memcpy(ab.data(), a.data(), static_cast<size_t>(a.size()) * 8);
  std::memcpy(ab.data() + a.size(), b.data(), static_cast<size_t>(b.size()) * 8);
  std::memcpy(ba.data(), b.data(), static_cast<size_t>(b.size()) * 8);
  std::memcpy(ba.data() + b.size(), a.data(), static_cast<size_t>(a.size()) * 8);
  Tensor fab = encode_visual(tp, w, ab);
  Tensor fba = encode_visual(tp, w, ba);
  int hs = fab.size() / 2;
  CHECK(std::memcmp(fab.data(), fba.data() + hs, static_cast<size_t>(hs) * 8) == 0);
  CHECK(std::memcmp(fab.data() + hs, fba.data(), static_cast<size_t>(hs) * 8) == 0);
}

TEST_CASE("constant input stays spatially constant through the encoder") {
  // replicate padding: a constant image sees the same stencil everywhere
  EncoderWeights w = small_encoder(1, 5, 7, 9);
  Tensor spec = Tensor::full({1, 24, 24, 1}, 0.37);
  Tape tp(false);
  Tensor f = encode_audio(tp, w, spec);
  CHECK(f.shape() == std::vector<int>{1, 7, 7, 5});
  for (int ch = 0; ch < 5; ++ch) {
    double ref = f.at({0, 0, 0, ch});
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 7; ++x) CHECK(f.at({0, y, x, ch}) == ref);
    }
  }
}

TEST_CASE("audio encoder lands on the visual grid and validates channels") {
  EncoderWeights va = small_encoder(1, 8, 7, 5);
  Rng rng(6);
  Tensor spec = random_uniform({2, 40, 28, 1}, rng, -3, 1);
  Tape tp(false);
  Tensor f = encode_audio(tp, va, spec);
  CHECK(f.shape() == std::vector<int>{2, 7, 7, 8});
  CHECK_THROWS_AS(encode_audio(tp, va, random_uniform({1, 16, 16, 3}, rng, 0, 1)), std::invalid_argument);
}

TEST_CASE("encoder gradients match finite differences") {
  EncoderWeights w = small_encoder(3, 4, 4, 7);
  Rng rng(8);
  Tensor images = random_uniform({1, 12, 12, 3}, rng, 0, 1);
  double err = grad_check(
      [&w](Tape& tp, const Tensor& x) {
        Tensor f = encode_visual(tp, w, x);
        return tp.sum_all(tp.mul(f, f));
      },
      images, 1e-5, 60, 42);
  CHECK(err < 1e-4);
}

TEST_CASE("gap_normalized: mean then unit norm with a zero guard") {
  Tape tp(false);
  // every cell (3,4): mean (3,4) -> (0.6, 0.8)
  Tensor F({1, 2, 2, 2}, {3, 4, 3, 4, 3, 4, 3, 4});
  Tensor l = gap_normalized(tp, F);
  CHECK(l.at({0, 0}) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(l.at({0, 1}) == doctest::Approx(0.8).epsilon(1e-12));

  // constant c=1 positive value normalizes to 1
  Tensor C = Tensor::full({1, 3, 3, 1}, 0.4);
  CHECK(gap_normalized(tp, C).at({0, 0}) == doctest::Approx(1.0).epsilon(1e-12));

  // all-zero features stay zero, no NaN
  Tensor Z({2, 2, 2, 3});
  Tensor lz = gap_normalized(tp, Z);
  for (int i = 0; i < lz.size(); ++i) CHECK(lz.data()[i] == 0.0);

  // unit norm within 1e-9 on random input
  Rng rng(10);
  Tensor R = random_uniform({3, 4, 4, 5}, rng, -1, 1);
  Tensor lr = gap_normalized(tp, R);
  for (int s = 0; s < 3; ++s) {
    double n2 = 0;
    for (int ch = 0; ch < 5; ++ch) n2 += lr.at({s, ch}) * lr.at({s, ch});
    CHECK(std::fabs(std::sqrt(n2) - 1.0) < 1e-9);
  }
}

TEST_CASE("shared weights are a single parameter set") {
  EncoderWeights w = small_encoder(3, 4, 4, 11);
  Rng rng(12);
  Tensor img = random_uniform({1, 16, 16, 3}, rng, 0, 1);
  Tape tp(false);
  Tensor before = encode_visual(tp, w, img);
  w.kernels[0].data()[0] += 0.25;  // mutate through one reference
  Tape tp2(false);
  Tensor after = encode_visual(tp2, w, img);
  CHECK(std::memcmp(before.data(), after.data(), static_cast<size_t>(before.size()) * 8) != 0);
}
