#include "avloc/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace avloc {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

int shape_size(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive dim in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) {
  int n = shape_size(shape);
  st_ = std::make_shared<Storage>();
  st_->shape = std::move(shape);
  st_->data.assign(static_cast<size_t>(n), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) {
  int n = shape_size(shape);
  if (static_cast<size_t>(n) != values.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " wants " + std::to_string(n) +
                                " values, got " + std::to_string(values.size()));
  }
  st_ = std::make_shared<Storage>();
  st_->shape = std::move(shape);
  st_->data = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.vec()) x = v;
  return t;
}

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("tensor: value() on non-scalar shape " + shape_str(shape()));
  return st_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

double& Tensor::at(std::initializer_list<int> idx) {
  if (static_cast<int>(idx.size()) != rank()) {
    throw std::invalid_argument("tensor: index rank " + std::to_string(idx.size()) + " vs shape " +
                                shape_str(shape()));
  }
  size_t lin = 0;
  int i = 0;
  for (int v : idx) {
    int d = st_->shape[static_cast<size_t>(i)];
    if (v < 0 || v >= d) throw std::out_of_range("tensor: index out of range");
    lin = lin * static_cast<size_t>(d) + static_cast<size_t>(v);
    ++i;
  }
  return st_->data[lin];
}

bool Tensor::all_finite() const {
  for (double v : st_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::detached() const {
  Tensor t;
  t.st_ = std::make_shared<Storage>();
  t.st_->shape = st_->shape;
  t.st_->data = st_->data;
  return t;
}

Tensor random_uniform(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& x : t.vec()) x = rng.uniform(lo, hi);
  return t;
}

Tensor random_normal(std::vector<int> shape, Rng& rng, double mean, double stddev) {
  Tensor t(std::move(shape));
  for (double& x : t.vec()) x = mean + stddev * rng.normal();
  return t;
}

}  // namespace avloc
