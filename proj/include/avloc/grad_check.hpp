#pragma once

#include <functional>
#include <vector>

#include "avloc/tape.hpp"

namespace avloc {

using TensorFn = std::function<Tensor(Tape&, const Tensor&)>;
using MultiTensorFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Max over checked coordinates of |analytic - central difference| / max(1, |analytic|).
// f must produce a scalar. max_coords == 0 checks every coordinate; otherwise a
// deterministic random subset of that size (seeded by sample_seed) is checked,
// which keeps image-sized inputs tractable.
double grad_check(const TensorFn& f, const Tensor& x, double step, int max_coords = 0,
                  uint64_t sample_seed = 0);

// Same, over several inputs; the budget applies per input.
double grad_check_multi(const MultiTensorFn& f, const std::vector<Tensor>& xs, double step,
                        int max_coords = 0, uint64_t sample_seed = 0);

}  // namespace avloc
