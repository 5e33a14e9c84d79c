#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "avloc/rng.hpp"

namespace avloc {

std::string shape_str(const std::vector<int>& shape);
int shape_size(const std::vector<int>& shape);

// Dense row-major tensor of doubles.
//
// Copies are shallow: they share storage, so mutating data through one
// handle is visible through every other handle. Tape ops always allocate
// fresh storage for their outputs. The (tape, node) binding marks where
// this tensor was recorded; it is meaningful only while that tape lives.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor full(std::vector<int> shape, double v);

  bool defined() const { return st_ != nullptr; }
  const std::vector<int>& shape() const { return st_->shape; }
  int rank() const { return static_cast<int>(st_->shape.size()); }
  int size() const { return static_cast<int>(st_->data.size()); }
  int dim(int i) const { return st_->shape[static_cast<size_t>(i)]; }

  double* data() { return st_->data.data(); }
  const double* data() const { return st_->data.data(); }
  std::vector<double>& vec() { return st_->data; }
  const std::vector<double>& vec() const { return st_->data; }

  // Scalar (size-1) tensors only.
  double value() const;
  double at(std::initializer_list<int> idx) const;
  double& at(std::initializer_list<int> idx);

  bool all_finite() const;

  // Deep copy with no tape binding. Also the stop-gradient primitive: the
  // result is a constant as far as any tape is concerned.
  Tensor detached() const;

  // Tape linkage; managed by Tape.
  int node_on(uint64_t tape_id) const {
    return (st_ && st_->tape == tape_id) ? st_->node : -1;
  }
  bool requires_grad() const { return st_ && st_->requires_grad; }
  void bind(uint64_t tape_id, int node, bool requires_grad) {
    st_->tape = tape_id;
    st_->node = node;
    st_->requires_grad = requires_grad;
  }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> data;
    uint64_t tape = 0;
    int node = -1;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> st_;
};

Tensor random_uniform(std::vector<int> shape, Rng& rng, double lo, double hi);
Tensor random_normal(std::vector<int> shape, Rng& rng, double mean, double stddev);

}  // namespace avloc
