#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "avloc/tensor.hpp"

namespace avloc {

class Tape;

// Result of a backward pass. Tensors recorded on the tape that received no
// gradient read back as zeros.
class Gradients {
 public:
  bool has(const Tensor& t) const;
  Tensor at(const Tensor& t) const;

 private:
  friend class Tape;
  uint64_t tape_id_ = 0;
  std::unordered_map<int, Tensor> by_node_;
  std::vector<std::vector<int>> node_shapes_;
};

// Reverse-mode tape over dense double tensors.
//
// Every primitive is a method: it computes the forward value and, when any
// input is tracked, records a node whose closure accumulates into the
// parents' gradient buffers. One thread per tape; reductions run in a fixed
// sequential order so repeated backward passes are bit-identical.
class Tape {
 public:
  Tape() : Tape(true) {}
  explicit Tape(bool recording);

  bool recording() const { return recording_; }
  size_t num_nodes() const { return nodes_.size(); }
  uint64_t id() const { return id_; }

  // Registers a leaf. Returns the same handle, now bound to this tape.
  Tensor watch(Tensor t);

  // ---- elementwise binary, numpy-style broadcasting ----
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);

  // ---- elementwise unary ----
  Tensor relu(const Tensor& x);
  Tensor log(const Tensor& x);   // requires strictly positive input
  Tensor exp(const Tensor& x);
  Tensor clamp(const Tensor& x, double lo, double hi);  // subgradient 0 at the bounds
  Tensor scale(const Tensor& x, double c);

  // ---- shape ----
  Tensor reshape(const Tensor& x, std::vector<int> shape);
  Tensor slice_row(const Tensor& x, int i);  // drops axis 0 at index i

  // ---- reductions (axis 0 is the batch axis) ----
  Tensor sum_all(const Tensor& x);                 // -> scalar
  Tensor reduce_max_batch(const Tensor& x);        // [N,...] -> [N]; ties get subgradient 0
  Tensor reduce_min_batch(const Tensor& x);        // [N,...] -> [N]; ties get subgradient 0
  Tensor mean_pool_hw(const Tensor& x);            // [N,h,w,c] -> [N,c]
  Tensor sum_channels(const Tensor& x);            // [N,h,w,c] -> [N,h,w]

  // ---- normalizations ----
  Tensor softmax(const Tensor& x);        // over last axis, per leading index
  Tensor l2_normalize(const Tensor& x);   // rows over last axis; zero rows stay zero
  // Per-sample (x - min) / (max - min + eps) over all trailing dims.
  Tensor minmax_scale(const Tensor& x, double eps);
  // Per-sample x / sum(x) over trailing dims; |sum| < eps falls back to a
  // uniform map (constant branch, zero gradient).
  Tensor normalize_sum(const Tensor& x, double eps);

  // ---- linear algebra / conv ----
  Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
  enum class Pad { kZero, kReplicate };
  // x [N,H,W,Cin], kernel [kh,kw,Cin,Cout], bias [Cout]; NHWC layout.
  Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int pad,
                Pad pad_mode = Pad::kZero);

  // ---- sampling ----
  // [N,h,w] or [N,h,w,c] -> same rank at H x W. Sample centers at
  // (i+0.5)*scale - 0.5 with edge clamping (align-corners-false). Written in
  // lerp form so constant inputs reproduce bit-exactly.
  Tensor bilinear_resize(const Tensor& x, int H, int W);

  // ---- fused attention kernel ----
  // cell (i,j) of sample n = cos(F[n,i,j,:], l[n,:]); cosine of a zero
  // vector is 0 with zero gradient.
  Tensor cosine_map(const Tensor& F, const Tensor& l);

  // Backward from a scalar loss. Deterministic: repeat runs bit-identical.
  Gradients backward(const Tensor& loss);

 private:
  using BackwardFn =
      std::function<void(const std::vector<double>& gout, const std::vector<std::vector<double>*>& pgrads)>;

  struct Node {
    std::vector<int> parents;  // node ids aligned with the op inputs; -1 = untracked
    std::vector<int> shape;
    BackwardFn back;  // null for leaves
  };

  int record(std::vector<const Tensor*> inputs, const std::vector<int>& out_shape, BackwardFn back);
  Tensor finish(Tensor out, std::vector<const Tensor*> inputs, BackwardFn back);

  Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, int kind);

  uint64_t id_;
  bool recording_;
  std::vector<Node> nodes_;
};

}  // namespace avloc
