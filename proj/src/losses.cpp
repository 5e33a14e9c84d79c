#include "avloc/losses.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "avloc/attention.hpp"
#include "avloc/error.hpp"

namespace avloc {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("loss config: tau must be positive");
  if (delta < 0.0) throw std::invalid_argument("loss config: delta must be >= 0");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("loss config: lambdas must be >= 0");
  if (ssl_pos_thresh < ssl_neg_thresh) {
    throw std::invalid_argument("loss config: ssl_pos_thresh must be >= ssl_neg_thresh");
  }
  if (!(ssl_temp > 0.0)) throw std::invalid_argument("loss config: ssl_temp must be positive");
}

namespace {

// D(a,b) = ||(a-b)/tau||^2
Tensor embedding_distance(Tape& tape, const Tensor& a, const Tensor& b, double tau) {
  Tensor d = tape.scale(tape.sub(a, b), 1.0 / tau);
  return tape.sum_all(tape.mul(d, d));
}

// Numerically stable softplus(z) = relu(z) + log(1 + exp(-|z|)), with
// -|z| written as z - 2*relu(z) so it stays on the tape.
Tensor softplus(Tape& tape, const Tensor& z) {
  Tensor r = tape.relu(z);
  Tensor neg_abs = tape.sub(z, tape.scale(r, 2.0));
  return tape.add(r, tape.log(tape.add(Tensor::scalar(1.0), tape.exp(neg_abs))));
}

}  // namespace

Tensor triplet_term(Tape& tape, const Tensor& anchor, const Tensor& pos, const Tensor& neg, double tau,
                    double delta) {
  if (anchor.shape() != pos.shape() || anchor.shape() != neg.shape()) {
    throw std::invalid_argument("triplet_term: embedding shapes differ");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("triplet_term: tau must be positive");
  Tensor d_pos = embedding_distance(tape, anchor, pos, tau);
  Tensor d_neg = embedding_distance(tape, anchor, neg, tau);
  Tensor hinge = tape.relu(tape.sub(Tensor::scalar(delta), d_neg));
  return tape.add(d_pos, hinge);
}

Tensor avpm_loss(Tape& tape, const Tensor& lv_att, const Tensor& lv, const Tensor& la,
                 const LossConfig& cfg) {
  cfg.validate();
  if (lv_att.rank() != 2 || lv_att.shape() != lv.shape() || lv_att.shape() != la.shape()) {
    throw std::invalid_argument("avpm_loss: embedding batches must share shape [N,c]");
  }
  int n = lv_att.dim(0);
  if (n < 2) {
    std::cerr << "[avloc] warning: avpm_loss needs N >= 2 for negatives; returning 0\n";
    return Tensor::scalar(0.0);
  }

  Tensor acc = Tensor::scalar(0.0);
  for (int i = 0; i < n; ++i) {
    Tensor anchor = tape.slice_row(lv_att, i);
    Tensor d_pos_a = embedding_distance(tape, anchor, tape.slice_row(la, i), cfg.tau);
    Tensor d_pos_v = embedding_distance(tape, anchor, tape.slice_row(lv, i), cfg.tau);
    // the positive distances repeat for every ordered pair (i, j)
    acc = tape.add(acc, tape.scale(tape.add(d_pos_a, d_pos_v), static_cast<double>(n - 1)));
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Tensor d_neg_a = embedding_distance(tape, anchor, tape.slice_row(la, j), cfg.tau);
      Tensor d_neg_v = embedding_distance(tape, anchor, tape.slice_row(lv, j), cfg.tau);
      acc = tape.add(acc, tape.relu(tape.sub(Tensor::scalar(cfg.delta), d_neg_a)));
      acc = tape.add(acc, tape.relu(tape.sub(Tensor::scalar(cfg.delta), d_neg_v)));
    }
  }
  return tape.scale(acc, 1.0 / (static_cast<double>(n) * (n - 1)));
}

Tensor spatial_distribution(Tape& tape, const Tensor& F) {
  if (F.rank() != 4) {
    throw std::invalid_argument("spatial_distribution: expected [N,h,w,c], got " + shape_str(F.shape()));
  }
  int n = F.dim(0), h = F.dim(1), w = F.dim(2);
  Tensor summed = tape.sum_channels(F);                  // [N,h,w]
  Tensor scaled = tape.minmax_scale(summed, kDenEps);    // [0,1] per sample
  return tape.softmax(tape.reshape(scaled, {n, h * w}));
}

Tensor sra_loss(Tape& tape, const Tensor& G_v_att, const Tensor& G_a) {
  if (G_v_att.rank() != 2 || G_v_att.shape() != G_a.shape()) {
    throw std::invalid_argument("sra_loss: distribution shapes differ");
  }
  for (int i = 0; i < G_v_att.size(); ++i) {
    if (!(G_v_att.data()[i] > 0.0) || !(G_a.data()[i] > 0.0)) {
      throw NumericError("sra_loss: non-positive distribution entry");
    }
  }
  int n = G_v_att.dim(0);
  Tensor target = G_v_att.detached();
  double entropy_part = 0.0;  // sum p*log(p), constant w.r.t. the audio stream
  for (int i = 0; i < target.size(); ++i) entropy_part += target.data()[i] * std::log(target.data()[i]);
  Tensor cross = tape.sum_all(tape.mul(target, tape.log(G_a)));
  return tape.scale(tape.sub(Tensor::scalar(entropy_part), cross), 1.0 / n);
}

Tensor ssl_loss(Tape& tape, const Tensor& F_v, const Tensor& l_a, const Tensor& S_v,
                const LossConfig& cfg) {
  cfg.validate();
  if (F_v.rank() != 4 || l_a.rank() != 2 || S_v.rank() != 3) {
    throw std::invalid_argument("ssl_loss: expected F_v [N,h,w,c], l_a [N,c], S_v [N,h,w]");
  }
  int n = F_v.dim(0), h = F_v.dim(1), w = F_v.dim(2), c = F_v.dim(3);
  if (l_a.dim(0) != n || l_a.dim(1) != c || S_v.dim(0) != n || S_v.dim(1) != h || S_v.dim(2) != w) {
    throw std::invalid_argument("ssl_loss: batch shapes disagree");
  }
  if (n < 2) throw std::invalid_argument("ssl_loss: contrastive loss undefined for N < 2");
  int cells = h * w;

  // Cell selection from the min-max normalized similarity map; frozen at
  // forward time. The max cell always lands in the positive set and the min
  // cell in the negative set, so neither pool can be empty.
  std::vector<std::vector<double>> pos_mask(static_cast<size_t>(n)), neg_mask(static_cast<size_t>(n));
  std::vector<int> pos_cnt(static_cast<size_t>(n), 0), neg_cnt(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const double* row = S_v.data() + static_cast<long>(i) * cells;
    double lo = row[0], hi = row[0];
    for (int k = 1; k < cells; ++k) {
      lo = std::min(lo, row[k]);
      hi = std::max(hi, row[k]);
    }
    double den = hi - lo + kDenEps;
    pos_mask[static_cast<size_t>(i)].assign(static_cast<size_t>(cells), 0.0);
    neg_mask[static_cast<size_t>(i)].assign(static_cast<size_t>(cells), 0.0);
    for (int k = 0; k < cells; ++k) {
      double v = (row[k] - lo) / den;
      if (v >= cfg.ssl_pos_thresh) {
        pos_mask[static_cast<size_t>(i)][static_cast<size_t>(k)] = 1.0;
        ++pos_cnt[static_cast<size_t>(i)];
      }
      if (v <= cfg.ssl_neg_thresh) {
        neg_mask[static_cast<size_t>(i)][static_cast<size_t>(k)] = 1.0;
        ++neg_cnt[static_cast<size_t>(i)];
      }
    }
    if (pos_cnt[static_cast<size_t>(i)] == 0) {  // degenerate constant map
      pos_mask[static_cast<size_t>(i)].assign(static_cast<size_t>(cells), 1.0);
      pos_cnt[static_cast<size_t>(i)] = cells;
    }
  }

  Tensor acc = Tensor::scalar(0.0);
  for (int i = 0; i < n; ++i) {
    Tensor li = tape.reshape(tape.slice_row(l_a, i), {1, c});
    Tensor own = tape.reshape(tape.slice_row(F_v, i), {1, h, w, c});
    Tensor cos_own = tape.cosine_map(own, li);  // [1,h,w]

    Tensor pm({1, h, w}, pos_mask[static_cast<size_t>(i)]);
    Tensor pos = tape.scale(tape.sum_all(tape.mul(cos_own, pm)), 1.0 / pos_cnt[static_cast<size_t>(i)]);

    Tensor neg_sum;
    int total_neg = neg_cnt[static_cast<size_t>(i)];
    if (total_neg > 0) {
      Tensor nm({1, h, w}, neg_mask[static_cast<size_t>(i)]);
      neg_sum = tape.sum_all(tape.mul(cos_own, nm));
    } else {
      neg_sum = Tensor::scalar(0.0);
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Tensor other = tape.reshape(tape.slice_row(F_v, j), {1, h, w, c});
      neg_sum = tape.add(neg_sum, tape.sum_all(tape.cosine_map(other, li)));
      total_neg += cells;
    }
    Tensor neg = tape.scale(neg_sum, 1.0 / total_neg);

    Tensor z = tape.scale(tape.sub(neg, pos), 1.0 / cfg.ssl_temp);
    acc = tape.add(acc, softplus(tape, z));
  }
  return tape.scale(acc, 1.0 / n);
}

Tensor total_loss(Tape& tape, const Tensor& ssl, const Tensor& avpm, const Tensor& sra,
                  const LossConfig& cfg) {
  cfg.validate();
  if (ssl.size() != 1 || avpm.size() != 1 || sra.size() != 1) {
    throw std::invalid_argument("total_loss: parts must be scalars");
  }
  if (!std::isfinite(ssl.value())) throw NumericError("total_loss: non-finite L_SSL");
  if (!std::isfinite(avpm.value())) throw NumericError("total_loss: non-finite L_avpm");
  if (!std::isfinite(sra.value())) throw NumericError("total_loss: non-finite L_sra");
  return tape.add(ssl, tape.add(tape.scale(avpm, cfg.lambda1), tape.scale(sra, cfg.lambda2)));
}

}  // namespace avloc
