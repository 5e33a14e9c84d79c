#include "avloc/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "avloc/error.hpp"

namespace avloc {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

uint64_t fresh_tape_id() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1);
}

[[noreturn]] void shape_fail(const char* op, const std::vector<int>& a, const std::vector<int>& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

struct BcastPlan {
  std::vector<int> out_shape;
  std::vector<long> sa, sb;  // per out-axis strides; 0 where broadcasting
  long total = 1;
};

BcastPlan make_bcast(const char* op, const std::vector<int>& sa, const std::vector<int>& sb) {
  BcastPlan p;
  int nd = static_cast<int>(std::max(sa.size(), sb.size()));
  p.out_shape.assign(static_cast<size_t>(nd), 1);
  std::vector<int> ea(static_cast<size_t>(nd), 1), eb(static_cast<size_t>(nd), 1);
  for (size_t i = 0; i < sa.size(); ++i) ea[nd - sa.size() + i] = sa[i];
  for (size_t i = 0; i < sb.size(); ++i) eb[nd - sb.size() + i] = sb[i];
  for (int d = 0; d < nd; ++d) {
    int da = ea[static_cast<size_t>(d)], db = eb[static_cast<size_t>(d)];
    if (da != db && da != 1 && db != 1) shape_fail(op, sa, sb);
    p.out_shape[static_cast<size_t>(d)] = std::max(da, db);
  }
  // row-major strides of the (virtually expanded) inputs
  p.sa.assign(static_cast<size_t>(nd), 0);
  p.sb.assign(static_cast<size_t>(nd), 0);
  long stra = 1, strb = 1;
  for (int d = nd - 1; d >= 0; --d) {
    p.sa[static_cast<size_t>(d)] = (ea[static_cast<size_t>(d)] == 1) ? 0 : stra;
    p.sb[static_cast<size_t>(d)] = (eb[static_cast<size_t>(d)] == 1) ? 0 : strb;
    stra *= ea[static_cast<size_t>(d)];
    strb *= eb[static_cast<size_t>(d)];
  }
  for (int d : p.out_shape) p.total *= d;
  return p;
}

// Walks the broadcast iteration space calling fn(out_linear, a_off, b_off).
template <typename Fn>
void bcast_walk(const BcastPlan& p, Fn&& fn) {
  int nd = static_cast<int>(p.out_shape.size());
  std::vector<int> idx(static_cast<size_t>(nd), 0);
  long offa = 0, offb = 0;
  for (long o = 0; o < p.total; ++o) {
    fn(o, offa, offb);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[static_cast<size_t>(d)];
      offa += p.sa[static_cast<size_t>(d)];
      offb += p.sb[static_cast<size_t>(d)];
      if (idx[static_cast<size_t>(d)] < p.out_shape[static_cast<size_t>(d)]) break;
      offa -= static_cast<long>(p.out_shape[static_cast<size_t>(d)]) * p.sa[static_cast<size_t>(d)];
      offb -= static_cast<long>(p.out_shape[static_cast<size_t>(d)]) * p.sb[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

int trailing_size(const std::vector<int>& shape) {
  int m = 1;
  for (size_t i = 1; i < shape.size(); ++i) m *= shape[static_cast<size_t>(i)];
  return m;
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                shape_str(t.shape()));
  }
}

struct ResizeAxis {
  std::vector<int> i0, i1;
  std::vector<double> f;
};

ResizeAxis plan_axis(int in, int out) {
  ResizeAxis ax;
  ax.i0.resize(static_cast<size_t>(out));
  ax.i1.resize(static_cast<size_t>(out));
  ax.f.resize(static_cast<size_t>(out));
  double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    double fl = std::floor(src);
    int lo = static_cast<int>(fl);
    double frac = src - fl;
    int hi = lo + 1;
    lo = std::clamp(lo, 0, in - 1);
    hi = std::clamp(hi, 0, in - 1);
    ax.i0[static_cast<size_t>(i)] = lo;
    ax.i1[static_cast<size_t>(i)] = hi;
    ax.f[static_cast<size_t>(i)] = frac;
  }
  return ax;
}

struct ConvDims {
  int N, H, W, C, kh, kw, Cout, OH, OW, R, Q;
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, const Tensor& bias, int stride, int pad) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", k, 4);
  ConvDims d{};
  d.N = x.dim(0);
  d.H = x.dim(1);
  d.W = x.dim(2);
  d.C = x.dim(3);
  d.kh = k.dim(0);
  d.kw = k.dim(1);
  d.Cout = k.dim(3);
  if (k.dim(2) != d.C) shape_fail("conv2d", x.shape(), k.shape());
  if (bias.size() != d.Cout) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) + " vs Cout " +
                                std::to_string(d.Cout));
  }
  if (stride <= 0 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
  d.OH = (d.H + 2 * pad - d.kh) / stride + 1;
  d.OW = (d.W + 2 * pad - d.kw) / stride + 1;
  if (d.H + 2 * pad < d.kh || d.W + 2 * pad < d.kw) {
    throw std::invalid_argument("conv2d: kernel " + shape_str(k.shape()) + " larger than padded input " +
                                shape_str(x.shape()));
  }
  d.R = d.N * d.OH * d.OW;
  d.Q = d.kh * d.kw * d.C;
  return d;
}

void im2col(const double* x, const ConvDims& d, int stride, int pad, bool replicate, double* col) {
  long r = 0;
  for (int n = 0; n < d.N; ++n) {
    const double* xn = x + static_cast<long>(n) * d.H * d.W * d.C;
    for (int oy = 0; oy < d.OH; ++oy) {
      for (int ox = 0; ox < d.OW; ++ox, ++r) {
        double* row = col + r * d.Q;
        long q = 0;
        for (int ky = 0; ky < d.kh; ++ky) {
          int iy = oy * stride - pad + ky;
          if (replicate) iy = std::clamp(iy, 0, d.H - 1);
          for (int kx = 0; kx < d.kw; ++kx) {
            int ix = ox * stride - pad + kx;
            if (replicate) ix = std::clamp(ix, 0, d.W - 1);
            if (iy < 0 || iy >= d.H || ix < 0 || ix >= d.W) {
              for (int c = 0; c < d.C; ++c) row[q++] = 0.0;
            } else {
              const double* px = xn + (static_cast<long>(iy) * d.W + ix) * d.C;
              for (int c = 0; c < d.C; ++c) row[q++] = px[c];
            }
          }
        }
      }
    }
  }
}

void col2im_add(double* dx, const ConvDims& d, int stride, int pad, bool replicate, const double* dcol) {
  long r = 0;
  for (int n = 0; n < d.N; ++n) {
    double* xn = dx + static_cast<long>(n) * d.H * d.W * d.C;
    for (int oy = 0; oy < d.OH; ++oy) {
      for (int ox = 0; ox < d.OW; ++ox, ++r) {
        const double* row = dcol + r * d.Q;
        long q = 0;
        for (int ky = 0; ky < d.kh; ++ky) {
          int iy = oy * stride - pad + ky;
          if (replicate) iy = std::clamp(iy, 0, d.H - 1);
          for (int kx = 0; kx < d.kw; ++kx) {
            int ix = ox * stride - pad + kx;
            if (replicate) ix = std::clamp(ix, 0, d.W - 1);
            if (iy < 0 || iy >= d.H || ix < 0 || ix >= d.W) {
              q += d.C;
            } else {
              double* px = xn + (static_cast<long>(iy) * d.W + ix) * d.C;
              for (int c = 0; c < d.C; ++c) px[c] += row[q++];
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Gradients

bool Gradients::has(const Tensor& t) const { return t.node_on(tape_id_) >= 0; }

Tensor Gradients::at(const Tensor& t) const {
  int node = t.node_on(tape_id_);
  if (node < 0) throw std::invalid_argument("gradients: tensor is not recorded on this tape");
  auto it = by_node_.find(node);
  if (it != by_node_.end()) return it->second;
  const std::vector<int>& sh = node_shapes_[static_cast<size_t>(node)];
  return sh.empty() ? Tensor::scalar(0.0) : Tensor(sh);
}

// ---------------------------------------------------------------------------
// Tape basics

Tape::Tape(bool recording) : id_(fresh_tape_id()), recording_(recording) {}

Tensor Tape::watch(Tensor t) {
  if (!recording_) return t;
  if (t.node_on(id_) >= 0) return t;
  Node n;
  n.shape = t.shape();
  int nid = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  t.bind(id_, nid, true);
  return t;
}

int Tape::record(std::vector<const Tensor*> inputs, const std::vector<int>& out_shape, BackwardFn back) {
  if (!recording_) return -1;
  std::vector<int> parents;
  parents.reserve(inputs.size());
  bool any = false;
  for (const Tensor* t : inputs) {
    int p = t->node_on(id_);
    parents.push_back(p);
    any = any || p >= 0;
  }
  if (!any) return -1;
  Node n;
  n.parents = std::move(parents);
  n.shape = out_shape;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::finish(Tensor out, std::vector<const Tensor*> inputs, BackwardFn back) {
  int nid = record(std::move(inputs), out.shape(), std::move(back));
  if (nid >= 0) out.bind(id_, nid, true);
  return out;
}

Gradients Tape::backward(const Tensor& loss) {
  int lnode = loss.node_on(id_);
  if (lnode < 0) throw std::invalid_argument("backward: loss is not recorded on this tape");
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (!std::isfinite(loss.value())) throw NumericError("backward: loss is not finite");

  std::vector<std::vector<double>> grads(nodes_.size());
  grads[static_cast<size_t>(lnode)] = {1.0};

  for (int nid = lnode; nid >= 0; --nid) {
    const Node& node = nodes_[static_cast<size_t>(nid)];
    std::vector<double>& g = grads[static_cast<size_t>(nid)];
    if (g.empty() || !node.back) continue;
    std::vector<std::vector<double>*> pgrads(node.parents.size(), nullptr);
    for (size_t i = 0; i < node.parents.size(); ++i) {
      int p = node.parents[i];
      if (p < 0) continue;
      std::vector<double>& pg = grads[static_cast<size_t>(p)];
      if (pg.empty()) pg.assign(static_cast<size_t>(shape_size(nodes_[static_cast<size_t>(p)].shape)), 0.0);
      pgrads[i] = &pg;
    }
    node.back(g, pgrads);
  }

  Gradients out;
  out.tape_id_ = id_;
  out.node_shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.node_shapes_.push_back(n.shape);
  for (size_t nid = 0; nid < grads.size(); ++nid) {
    if (grads[nid].empty()) continue;
    out.by_node_.emplace(static_cast<int>(nid), Tensor(nodes_[nid].shape, std::move(grads[nid])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise binary with broadcasting

Tensor Tape::binary_op(const char* name, const Tensor& a, const Tensor& b, int kind) {
  BcastPlan p = make_bcast(name, a.shape(), b.shape());
  Tensor out(p.out_shape);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  switch (kind) {
    case 0:
      bcast_walk(p, [&](long o, long ia, long ib) { po[o] = pa[ia] + pb[ib]; });
      break;
    case 1:
      bcast_walk(p, [&](long o, long ia, long ib) { po[o] = pa[ia] - pb[ib]; });
      break;
    case 2:
      bcast_walk(p, [&](long o, long ia, long ib) { po[o] = pa[ia] * pb[ib]; });
      break;
    default:
      bcast_walk(p, [&](long o, long ia, long ib) { po[o] = pa[ia] / pb[ib]; });
      break;
  }
  Tensor av = a, bv = b;  // keep inputs alive for the closure
  return finish(std::move(out), {&a, &b},
                [p, av, bv, kind](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  const double* pa = av.data();
                  const double* pb = bv.data();
                  double* da = pg[0] ? pg[0]->data() : nullptr;
                  double* db = pg[1] ? pg[1]->data() : nullptr;
                  switch (kind) {
                    case 0:
                      bcast_walk(p, [&](long o, long ia, long ib) {
                        if (da) da[ia] += g[static_cast<size_t>(o)];
                        if (db) db[ib] += g[static_cast<size_t>(o)];
                      });
                      break;
                    case 1:
                      bcast_walk(p, [&](long o, long ia, long ib) {
                        if (da) da[ia] += g[static_cast<size_t>(o)];
                        if (db) db[ib] -= g[static_cast<size_t>(o)];
                      });
                      break;
                    case 2:
                      bcast_walk(p, [&](long o, long ia, long ib) {
                        if (da) da[ia] += g[static_cast<size_t>(o)] * pb[ib];
                        if (db) db[ib] += g[static_cast<size_t>(o)] * pa[ia];
                      });
                      break;
                    default:
                      bcast_walk(p, [&](long o, long ia, long ib) {
                        double inv = 1.0 / pb[ib];
                        if (da) da[ia] += g[static_cast<size_t>(o)] * inv;
                        if (db) db[ib] -= g[static_cast<size_t>(o)] * pa[ia] * inv * inv;
                      });
                      break;
                  }
                });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return binary_op("add", a, b, 0); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return binary_op("sub", a, b, 1); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return binary_op("mul", a, b, 2); }
Tensor Tape::div(const Tensor& a, const Tensor& b) { return binary_op("div", a, b, 3); }

// ---------------------------------------------------------------------------
// Elementwise unary

Tensor Tape::relu(const Tensor& x) {
  Tensor out(x.shape());
  for (int i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  Tensor xv = x;
  return finish(std::move(out), {&x},
                [xv](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) {
                    if (xv.data()[i] > 0.0) d[i] += g[i];
                  }
                });
}

Tensor Tape::log(const Tensor& x) {
  Tensor out(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    double v = x.data()[i];
    if (!(v > 0.0)) throw NumericError("log: non-positive input value " + std::to_string(v));
    out.data()[i] = std::log(v);
  }
  Tensor xv = x;
  return finish(std::move(out), {&x},
                [xv](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) d[i] += g[i] / xv.data()[i];
                });
}

Tensor Tape::exp(const Tensor& x) {
  Tensor out(x.shape());
  for (int i = 0; i < x.size(); ++i) out.data()[i] = std::exp(x.data()[i]);
  Tensor yv = out;
  return finish(std::move(out), {&x},
                [yv](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) d[i] += g[i] * yv.data()[i];
                });
}

Tensor Tape::clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  Tensor out(x.shape());
  for (int i = 0; i < x.size(); ++i) out.data()[i] = std::clamp(x.data()[i], lo, hi);
  Tensor xv = x;
  return finish(std::move(out), {&x},
                [xv, lo, hi](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) {
                    double v = xv.data()[i];
                    if (v > lo && v < hi) d[i] += g[i];
                  }
                });
}

Tensor Tape::scale(const Tensor& x, double c) {
  Tensor out(x.shape());
  for (int i = 0; i < x.size(); ++i) out.data()[i] = c * x.data()[i];
  return finish(std::move(out), {&x},
                [c](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
                });
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_size(shape) != x.size()) {
    throw std::invalid_argument("reshape: size mismatch " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tensor out(std::move(shape), x.vec());
  return finish(std::move(out), {&x},
                [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                });
}

Tensor Tape::slice_row(const Tensor& x, int i) {
  if (x.rank() < 1) throw std::invalid_argument("slice_row: rank-0 input");
  int n = x.dim(0);
  if (i < 0 || i >= n) throw std::out_of_range("slice_row: index " + std::to_string(i) + " of " + std::to_string(n));
  std::vector<int> oshape(x.shape().begin() + 1, x.shape().end());
  int m = trailing_size(x.shape());
  Tensor out(oshape, std::vector<double>(x.data() + static_cast<long>(i) * m,
                                         x.data() + static_cast<long>(i + 1) * m));
  return finish(std::move(out), {&x},
                [i, m](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data() + static_cast<long>(i) * m;
                  for (size_t k = 0; k < g.size(); ++k) d[k] += g[k];
                });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor Tape::sum_all(const Tensor& x) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s);
  return finish(std::move(out), {&x},
                [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < pg[0]->size(); ++i) d[i] += g[0];
                });
}

Tensor Tape::reduce_max_batch(const Tensor& x) {
  if (x.rank() < 2) throw std::invalid_argument("reduce_max_batch: need rank >= 2, got " + shape_str(x.shape()));
  int n = x.dim(0), m = trailing_size(x.shape());
  Tensor out({n});
  std::vector<int> arg(static_cast<size_t>(n));
  std::vector<int> ties(static_cast<size_t>(n), 0);
  for (int s = 0; s < n; ++s) {
    const double* row = x.data() + static_cast<long>(s) * m;
    int a = 0;
    for (int i = 1; i < m; ++i) {
      if (row[i] > row[a]) a = i;
    }
    int count = 0;
    for (int i = 0; i < m; ++i) {
      if (row[i] == row[a]) ++count;
    }
    out.data()[s] = row[a];
    arg[static_cast<size_t>(s)] = a;
    ties[static_cast<size_t>(s)] = count;
  }
  return finish(std::move(out), {&x},
                [arg, ties, m](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  for (size_t s = 0; s < g.size(); ++s) {
                    if (ties[s] != 1) continue;  // subgradient 0 at ties
                    (*pg[0])[s * static_cast<size_t>(m) + static_cast<size_t>(arg[s])] += g[s];
                  }
                });
}

Tensor Tape::reduce_min_batch(const Tensor& x) {
  if (x.rank() < 2) throw std::invalid_argument("reduce_min_batch: need rank >= 2, got " + shape_str(x.shape()));
  int n = x.dim(0), m = trailing_size(x.shape());
  Tensor out({n});
  std::vector<int> arg(static_cast<size_t>(n));
  std::vector<int> ties(static_cast<size_t>(n), 0);
  for (int s = 0; s < n; ++s) {
    const double* row = x.data() + static_cast<long>(s) * m;
    int a = 0;
    for (int i = 1; i < m; ++i) {
      if (row[i] < row[a]) a = i;
    }
    int count = 0;
    for (int i = 0; i < m; ++i) {
      if (row[i] == row[a]) ++count;
    }
    out.data()[s] = row[a];
    arg[static_cast<size_t>(s)] = a;
    ties[static_cast<size_t>(s)] = count;
  }
  return finish(std::move(out), {&x},
                [arg, ties, m](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  for (size_t s = 0; s < g.size(); ++s) {
                    if (ties[s] != 1) continue;
                    (*pg[0])[s * static_cast<size_t>(m) + static_cast<size_t>(arg[s])] += g[s];
                  }
                });
}

Tensor Tape::mean_pool_hw(const Tensor& x) {
  require_rank("mean_pool_hw", x, 4);
  int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  int cells = h * w;
  Tensor out({n, c});
  for (int s = 0; s < n; ++s) {
    const double* base = x.data() + static_cast<long>(s) * cells * c;
    double* orow = out.data() + static_cast<long>(s) * c;
    for (int i = 0; i < cells; ++i) {
      for (int ch = 0; ch < c; ++ch) orow[ch] += base[static_cast<long>(i) * c + ch];
    }
    for (int ch = 0; ch < c; ++ch) orow[ch] /= cells;
  }
  return finish(std::move(out), {&x},
                [n, cells, c](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (int s = 0; s < n; ++s) {
                    const double* grow = g.data() + static_cast<long>(s) * c;
                    double* base = d + static_cast<long>(s) * cells * c;
                    for (int i = 0; i < cells; ++i) {
                      for (int ch = 0; ch < c; ++ch) base[static_cast<long>(i) * c + ch] += grow[ch] / cells;
                    }
                  }
                });
}

Tensor Tape::sum_channels(const Tensor& x) {
  require_rank("sum_channels", x, 4);
  int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  int cells = n * h * w;
  Tensor out({n, h, w});
  for (int i = 0; i < cells; ++i) {
    double s = 0.0;
    const double* px = x.data() + static_cast<long>(i) * c;
    for (int ch = 0; ch < c; ++ch) s += px[ch];
    out.data()[i] = s;
  }
  return finish(std::move(out), {&x},
                [c](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (size_t i = 0; i < g.size(); ++i) {
                    for (int ch = 0; ch < c; ++ch) d[i * static_cast<size_t>(c) + static_cast<size_t>(ch)] += g[i];
                  }
                });
}

// ---------------------------------------------------------------------------
// Normalizations

Tensor Tape::softmax(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("softmax: rank-0 input");
  int L = x.dim(x.rank() - 1);
  int groups = x.size() / L;
  Tensor out(x.shape());
  for (int gi = 0; gi < groups; ++gi) {
    const double* row = x.data() + static_cast<long>(gi) * L;
    double* orow = out.data() + static_cast<long>(gi) * L;
    double mx = row[0];
    for (int i = 1; i < L; ++i) mx = std::max(mx, row[i]);
    double den = 0.0;
    for (int i = 0; i < L; ++i) {
      orow[i] = std::exp(row[i] - mx);
      den += orow[i];
    }
    for (int i = 0; i < L; ++i) orow[i] /= den;
  }
  Tensor yv = out;
  return finish(std::move(out), {&x},
                [yv, groups, L](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (int gi = 0; gi < groups; ++gi) {
                    const double* y = yv.data() + static_cast<long>(gi) * L;
                    const double* gr = g.data() + static_cast<long>(gi) * L;
                    double dot = 0.0;
                    for (int i = 0; i < L; ++i) dot += gr[i] * y[i];
                    double* dr = d + static_cast<long>(gi) * L;
                    for (int i = 0; i < L; ++i) dr[i] += y[i] * (gr[i] - dot);
                  }
                });
}

Tensor Tape::l2_normalize(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("l2_normalize: rank-0 input");
  int L = x.dim(x.rank() - 1);
  int groups = x.size() / L;
  Tensor out(x.shape());
  std::vector<double> norms(static_cast<size_t>(groups));
  for (int gi = 0; gi < groups; ++gi) {
    const double* row = x.data() + static_cast<long>(gi) * L;
    double s = 0.0;
    for (int i = 0; i < L; ++i) s += row[i] * row[i];
    double r = std::sqrt(s);
    norms[static_cast<size_t>(gi)] = r;
    double* orow = out.data() + static_cast<long>(gi) * L;
    if (r == 0.0) {
      for (int i = 0; i < L; ++i) orow[i] = 0.0;  // silent input stays zero
    } else {
      for (int i = 0; i < L; ++i) orow[i] = row[i] / r;
    }
  }
  Tensor xv = x;
  return finish(std::move(out), {&x},
                [xv, norms, groups, L](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (int gi = 0; gi < groups; ++gi) {
                    double r = norms[static_cast<size_t>(gi)];
                    if (r == 0.0) continue;
                    const double* row = xv.data() + static_cast<long>(gi) * L;
                    const double* gr = g.data() + static_cast<long>(gi) * L;
                    double dot = 0.0;
                    for (int i = 0; i < L; ++i) dot += gr[i] * row[i];
                    double r3 = r * r * r;
                    double* dr = d + static_cast<long>(gi) * L;
                    for (int i = 0; i < L; ++i) dr[i] += gr[i] / r - row[i] * dot / r3;
                  }
                });
}

Tensor Tape::minmax_scale(const Tensor& x, double eps) {
  if (x.rank() < 2) throw std::invalid_argument("minmax_scale: need rank >= 2, got " + shape_str(x.shape()));
  int n = x.dim(0), m = trailing_size(x.shape());
  Tensor out(x.shape());
  std::vector<int> amin(static_cast<size_t>(n)), amax(static_cast<size_t>(n));
  std::vector<int> tmin(static_cast<size_t>(n)), tmax(static_cast<size_t>(n));
  std::vector<double> den(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    const double* row = x.data() + static_cast<long>(s) * m;
    int lo = 0, hi = 0;
    for (int i = 1; i < m; ++i) {
      if (row[i] < row[lo]) lo = i;
      if (row[i] > row[hi]) hi = i;
    }
    int clo = 0, chi = 0;
    for (int i = 0; i < m; ++i) {
      if (row[i] == row[lo]) ++clo;
      if (row[i] == row[hi]) ++chi;
    }
    double d = row[hi] - row[lo] + eps;
    double* orow = out.data() + static_cast<long>(s) * m;
    for (int i = 0; i < m; ++i) orow[i] = (row[i] - row[lo]) / d;
    amin[static_cast<size_t>(s)] = lo;
    amax[static_cast<size_t>(s)] = hi;
    tmin[static_cast<size_t>(s)] = clo;
    tmax[static_cast<size_t>(s)] = chi;
    den[static_cast<size_t>(s)] = d;
  }
  Tensor yv = out;
  return finish(std::move(out), {&x},
                [yv, amin, amax, tmin, tmax, den, n, m](const std::vector<double>& g,
                                                        const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* dgrad = pg[0]->data();
                  for (int s = 0; s < n; ++s) {
                    const double* gr = g.data() + static_cast<long>(s) * m;
                    const double* y = yv.data() + static_cast<long>(s) * m;
                    double d = den[static_cast<size_t>(s)];
                    double G = 0.0, H = 0.0;
                    for (int i = 0; i < m; ++i) {
                      G += gr[i];
                      H += gr[i] * y[i];
                    }
                    double* dr = dgrad + static_cast<long>(s) * m;
                    for (int i = 0; i < m; ++i) dr[i] += gr[i] / d;
                    if (tmin[static_cast<size_t>(s)] == 1) dr[amin[static_cast<size_t>(s)]] += (H - G) / d;
                    if (tmax[static_cast<size_t>(s)] == 1) dr[amax[static_cast<size_t>(s)]] -= H / d;
                  }
                });
}

Tensor Tape::normalize_sum(const Tensor& x, double eps) {
  if (x.rank() < 2) throw std::invalid_argument("normalize_sum: need rank >= 2, got " + shape_str(x.shape()));
  int n = x.dim(0), m = trailing_size(x.shape());
  Tensor out(x.shape());
  std::vector<double> den(static_cast<size_t>(n));
  std::vector<char> uniform(static_cast<size_t>(n), 0);
  for (int s = 0; s < n; ++s) {
    const double* row = x.data() + static_cast<long>(s) * m;
    double sum = 0.0;
    for (int i = 0; i < m; ++i) sum += row[i];
    double* orow = out.data() + static_cast<long>(s) * m;
    if (std::fabs(sum) < eps) {
      uniform[static_cast<size_t>(s)] = 1;  // degenerate: constant branch
      for (int i = 0; i < m; ++i) orow[i] = 1.0 / m;
    } else {
      for (int i = 0; i < m; ++i) orow[i] = row[i] / sum;
    }
    den[static_cast<size_t>(s)] = sum;
  }
  Tensor yv = out;
  return finish(std::move(out), {&x},
                [yv, den, uniform, n, m](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (int s = 0; s < n; ++s) {
                    if (uniform[static_cast<size_t>(s)]) continue;
                    const double* gr = g.data() + static_cast<long>(s) * m;
                    const double* y = yv.data() + static_cast<long>(s) * m;
                    double sum = den[static_cast<size_t>(s)];
                    double dot = 0.0;
                    for (int i = 0; i < m; ++i) dot += gr[i] * y[i];
                    double* dr = d + static_cast<long>(s) * m;
                    for (int i = 0; i < m; ++i) dr[i] += (gr[i] - dot) / sum;
                  }
                });
}

// ---------------------------------------------------------------------------
// Linear algebra / conv

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) shape_fail("matmul", a.shape(), b.shape());
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  CMapRM am(a.data(), m, k), bm(b.data(), k, n);
  MapRM om(out.data(), m, n);
  om.noalias() = am * bm;
  Tensor av = a, bv = b;
  return finish(std::move(out), {&a, &b},
                [av, bv, m, k, n](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                  CMapRM gm(g.data(), m, n);
                  CMapRM am(av.data(), m, k), bm(bv.data(), k, n);
                  if (pg[0]) {
                    MapRM da(pg[0]->data(), m, k);
                    da.noalias() += gm * bm.transpose();
                  }
                  if (pg[1]) {
                    MapRM db(pg[1]->data(), k, n);
                    db.noalias() += am.transpose() * gm;
                  }
                });
}

Tensor Tape::conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int pad,
                    Pad pad_mode) {
  ConvDims d = conv_dims(x, kernel, bias, stride, pad);
  bool rep = pad_mode == Pad::kReplicate;
  std::vector<double> col(static_cast<size_t>(d.R) * static_cast<size_t>(d.Q));
  im2col(x.data(), d, stride, pad, rep, col.data());
  Tensor out({d.N, d.OH, d.OW, d.Cout});
  {
    CMapRM cm(col.data(), d.R, d.Q), km(kernel.data(), d.Q, d.Cout);
    MapRM om(out.data(), d.R, d.Cout);
    om.noalias() = cm * km;
    for (int r = 0; r < d.R; ++r) {
      double* row = out.data() + static_cast<long>(r) * d.Cout;
      for (int c = 0; c < d.Cout; ++c) row[c] += bias.data()[c];
    }
  }
  Tensor xv = x, kv = kernel;
  return finish(std::move(out), {&x, &kernel, &bias},
                [xv, kv, d, stride, pad, rep](const std::vector<double>& g,
                                              const std::vector<std::vector<double>*>& pg) {
                  CMapRM gm(g.data(), d.R, d.Cout);
                  if (pg[2]) {
                    double* db = pg[2]->data();
                    for (int r = 0; r < d.R; ++r) {
                      const double* row = g.data() + static_cast<long>(r) * d.Cout;
                      for (int c = 0; c < d.Cout; ++c) db[c] += row[c];
                    }
                  }
                  if (pg[0] || pg[1]) {
                    std::vector<double> col(static_cast<size_t>(d.R) * static_cast<size_t>(d.Q));
                    im2col(xv.data(), d, stride, pad, rep, col.data());
                    if (pg[1]) {
                      CMapRM cm(col.data(), d.R, d.Q);
                      MapRM dk(pg[1]->data(), d.Q, d.Cout);
                      dk.noalias() += cm.transpose() * gm;
                    }
                    if (pg[0]) {
                      std::vector<double> dcol(static_cast<size_t>(d.R) * static_cast<size_t>(d.Q));
                      CMapRM km(kv.data(), d.Q, d.Cout);
                      MapRM dc(dcol.data(), d.R, d.Q);
                      dc.noalias() = gm * km.transpose();
                      col2im_add(pg[0]->data(), d, stride, pad, rep, dcol.data());
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Bilinear resize

Tensor Tape::bilinear_resize(const Tensor& x, int H, int W) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw std::invalid_argument("bilinear_resize: need rank 3 or 4, got " + shape_str(x.shape()));
  }
  if (H <= 0 || W <= 0) throw std::invalid_argument("bilinear_resize: nonpositive target dims");
  int n = x.dim(0), h = x.dim(1), w = x.dim(2);
  int c = x.rank() == 4 ? x.dim(3) : 1;
  ResizeAxis ay = plan_axis(h, H), ax = plan_axis(w, W);
  std::vector<int> oshape = x.rank() == 4 ? std::vector<int>{n, H, W, c} : std::vector<int>{n, H, W};
  Tensor out(oshape);
  const double* px = x.data();
  double* po = out.data();
  for (int s = 0; s < n; ++s) {
    const double* xs = px + static_cast<long>(s) * h * w * c;
    double* os = po + static_cast<long>(s) * H * W * c;
    for (int oy = 0; oy < H; ++oy) {
      int y0 = ay.i0[static_cast<size_t>(oy)], y1 = ay.i1[static_cast<size_t>(oy)];
      double fy = ay.f[static_cast<size_t>(oy)];
      for (int ox = 0; ox < W; ++ox) {
        int x0 = ax.i0[static_cast<size_t>(ox)], x1 = ax.i1[static_cast<size_t>(ox)];
        double fx = ax.f[static_cast<size_t>(ox)];
        for (int ch = 0; ch < c; ++ch) {
          double v00 = xs[(static_cast<long>(y0) * w + x0) * c + ch];
          double v01 = xs[(static_cast<long>(y0) * w + x1) * c + ch];
          double v10 = xs[(static_cast<long>(y1) * w + x0) * c + ch];
          double v11 = xs[(static_cast<long>(y1) * w + x1) * c + ch];
          // lerp form: exact for constant inputs
          double top = v00 + fx * (v01 - v00);
          double bot = v10 + fx * (v11 - v10);
          os[(static_cast<long>(oy) * W + ox) * c + ch] = top + fy * (bot - top);
        }
      }
    }
  }
  return finish(std::move(out), {&x},
                [n, h, w, c, H, W, ay, ax](const std::vector<double>& g,
                                           const std::vector<std::vector<double>*>& pg) {
                  if (!pg[0]) return;
                  double* d = pg[0]->data();
                  for (int s = 0; s < n; ++s) {
                    const double* gs = g.data() + static_cast<long>(s) * H * W * c;
                    double* ds = d + static_cast<long>(s) * h * w * c;
                    for (int oy = 0; oy < H; ++oy) {
                      int y0 = ay.i0[static_cast<size_t>(oy)], y1 = ay.i1[static_cast<size_t>(oy)];
                      double fy = ay.f[static_cast<size_t>(oy)];
                      for (int ox = 0; ox < W; ++ox) {
                        int x0 = ax.i0[static_cast<size_t>(ox)], x1 = ax.i1[static_cast<size_t>(ox)];
                        double fx = ax.f[static_cast<size_t>(ox)];
                        for (int ch = 0; ch < c; ++ch) {
                          double gv = gs[(static_cast<long>(oy) * W + ox) * c + ch];
                          ds[(static_cast<long>(y0) * w + x0) * c + ch] += gv * (1 - fx) * (1 - fy);
                          ds[(static_cast<long>(y0) * w + x1) * c + ch] += gv * fx * (1 - fy);
                          ds[(static_cast<long>(y1) * w + x0) * c + ch] += gv * (1 - fx) * fy;
                          ds[(static_cast<long>(y1) * w + x1) * c + ch] += gv * fx * fy;
                        }
                      }
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Cosine attention kernel

Tensor Tape::cosine_map(const Tensor& F, const Tensor& l) {
  require_rank("cosine_map", F, 4);
  require_rank("cosine_map", l, 2);
  if (F.dim(0) != l.dim(0) || F.dim(3) != l.dim(1)) shape_fail("cosine_map", F.shape(), l.shape());
  int n = F.dim(0), h = F.dim(1), w = F.dim(2), c = F.dim(3);
  int cells = h * w;
  Tensor out({n, h, w});
  for (int s = 0; s < n; ++s) {
    const double* lv = l.data() + static_cast<long>(s) * c;
    double nl = 0.0;
    for (int ch = 0; ch < c; ++ch) nl += lv[ch] * lv[ch];
    nl = std::sqrt(nl);
    const double* Fs = F.data() + static_cast<long>(s) * cells * c;
    double* os = out.data() + static_cast<long>(s) * cells;
    for (int i = 0; i < cells; ++i) {
      const double* f = Fs + static_cast<long>(i) * c;
      double nf = 0.0, dot = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        nf += f[ch] * f[ch];
        dot += f[ch] * lv[ch];
      }
      nf = std::sqrt(nf);
      os[i] = (nf == 0.0 || nl == 0.0) ? 0.0 : dot / (nf * nl);
    }
  }
  Tensor Fv = F, lvt = l, yv = out;
  return finish(std::move(out), {&F, &l},
                [Fv, lvt, yv, n, cells, c](const std::vector<double>& g,
                                           const std::vector<std::vector<double>*>& pg) {
                  for (int s = 0; s < n; ++s) {
                    const double* lv = lvt.data() + static_cast<long>(s) * c;
                    double nl = 0.0;
                    for (int ch = 0; ch < c; ++ch) nl += lv[ch] * lv[ch];
                    nl = std::sqrt(nl);
                    if (nl == 0.0) continue;
                    const double* Fs = Fv.data() + static_cast<long>(s) * cells * c;
                    const double* ys = yv.data() + static_cast<long>(s) * cells;
                    const double* gs = g.data() + static_cast<long>(s) * cells;
                    for (int i = 0; i < cells; ++i) {
                      const double* f = Fs + static_cast<long>(i) * c;
                      double nf = 0.0;
                      for (int ch = 0; ch < c; ++ch) nf += f[ch] * f[ch];
                      nf = std::sqrt(nf);
                      if (nf == 0.0) continue;
                      double cosv = ys[i], gv = gs[i];
                      if (gv == 0.0) continue;
                      double inv = 1.0 / (nf * nl);
                      if (pg[0]) {
                        double* df = pg[0]->data() + (static_cast<long>(s) * cells + i) * c;
                        for (int ch = 0; ch < c; ++ch) df[ch] += gv * (lv[ch] * inv - cosv * f[ch] / (nf * nf));
                      }
                      if (pg[1]) {
                        double* dl = pg[1]->data() + static_cast<long>(s) * c;
                        for (int ch = 0; ch < c; ++ch) dl[ch] += gv * (f[ch] * inv - cosv * lv[ch] / (nl * nl));
                      }
                    }
                  }
                });
}

}  // namespace avloc
