#include "avloc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "avloc/error.hpp"
#include "avloc/rng.hpp"

namespace avloc {

namespace {

std::vector<int> pick_coords(int size, int max_coords, uint64_t seed) {
  std::vector<int> coords;
  if (max_coords <= 0 || max_coords >= size) {
    coords.resize(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) coords[static_cast<size_t>(i)] = i;
    return coords;
  }
  Rng rng(seed ^ 0xC00D5ULL);
  std::unordered_set<int> seen;
  while (static_cast<int>(coords.size()) < max_coords) {
    int k = rng.below(size);
    if (seen.insert(k).second) coords.push_back(k);
  }
  std::sort(coords.begin(), coords.end());
  return coords;
}

double eval_scalar(const MultiTensorFn& f, const std::vector<Tensor>& xs) {
  Tape tp(false);
  Tensor y = f(tp, xs);
  if (y.size() != 1) throw std::invalid_argument("grad_check: function output is not scalar");
  double v = y.value();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

double grad_check_multi(const MultiTensorFn& f, const std::vector<Tensor>& xs, double step,
                        int max_coords, uint64_t sample_seed) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

  std::vector<Tensor> base;
  base.reserve(xs.size());
  for (const Tensor& x : xs) base.push_back(x.detached());

  Tape tape;
  std::vector<Tensor> tracked;
  tracked.reserve(base.size());
  for (Tensor& x : base) tracked.push_back(tape.watch(x));
  Tensor y = f(tape, tracked);
  if (y.size() != 1) throw std::invalid_argument("grad_check: function output is not scalar");
  if (!std::isfinite(y.value())) throw NumericError("grad_check: non-finite function value");
  Gradients grads = tape.backward(y);

  double worst = 0.0;
  for (size_t xi = 0; xi < base.size(); ++xi) {
    Tensor analytic = grads.at(tracked[xi]);
    std::vector<int> coords = pick_coords(base[xi].size(), max_coords, sample_seed + 7919 * xi);
    for (int k : coords) {
      std::vector<Tensor> probe;
      probe.reserve(base.size());
      for (const Tensor& b : base) probe.push_back(b);
      Tensor hi = base[xi].detached();
      hi.data()[k] += step;
      probe[xi] = hi;
      double fp = eval_scalar(f, probe);
      Tensor lo = base[xi].detached();
      lo.data()[k] -= step;
      probe[xi] = lo;
      double fm = eval_scalar(f, probe);
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic.data()[k];
      double err = std::fabs(a - numeric) / std::max(1.0, std::fabs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const TensorFn& f, const Tensor& x, double step, int max_coords, uint64_t sample_seed) {
  return grad_check_multi(
      [&f](Tape& tp, const std::vector<Tensor>& xs) { return f(tp, xs[0]); }, {x}, step, max_coords,
      sample_seed);
}

}  // namespace avloc
