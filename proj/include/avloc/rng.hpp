#pragma once

#include <cmath>
#include <cstdint>

namespace avloc {

// splitmix64 counter generator. One word of state, trivially serializable,
// and independent of libstdc++ distribution internals, so streams are
// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  // Decorrelated substream, e.g. one per sample index or per epoch.
  static Rng fork(uint64_t seed, uint64_t stream) {
    Rng r(seed ^ (0x9E3779B97F4A7C15ULL + stream * 0xD1B54A32D192ED03ULL));
    r.next_u64();
    return r;
  }

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), n > 0
  int below(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  // Box-Muller, cosine branch only so state stays a single word.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace avloc
