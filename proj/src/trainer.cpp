#include "avloc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "avloc/checkpoint.hpp"
#include "avloc/error.hpp"

namespace fs = std::filesystem;

namespace avloc {

void Adam::init(const std::vector<Tensor*>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.emplace_back(p->shape());
    v.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != m.size() || grads.size() != params.size()) {
    throw std::invalid_argument("adam: parameter/gradient count mismatch");
  }
  ++t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t k = 0; k < params.size(); ++k) {
    double* w = params[k]->data();
    double* mk = m[k].data();
    double* vk = v[k].data();
    const double* g = grads[k].data();
    int n = params[k]->size();
    for (int i = 0; i < n; ++i) {
      mk[i] = beta1 * mk[i] + (1.0 - beta1) * g[i];
      vk[i] = beta2 * vk[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = mk[i] / bc1;
      double vhat = vk[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

Tensor batch_images(const Dataset& ds, const std::vector<int>& ids) {
  int H = ds.image_size;
  Tensor out({static_cast<int>(ids.size()), H, H, 3});
  double* dst = out.data();
  for (size_t b = 0; b < ids.size(); ++b) {
    const std::vector<float>& src = ds.images[static_cast<size_t>(ids[b])];
    for (size_t i = 0; i < src.size(); ++i) dst[b * src.size() + i] = src[i];
  }
  return out;
}

Tensor batch_specs(const Dataset& ds, const std::vector<int>& ids) {
  Tensor out({static_cast<int>(ids.size()), ds.spec_bins, ds.spec_frames, 1});
  double* dst = out.data();
  for (size_t b = 0; b < ids.size(); ++b) {
    const std::vector<float>& src = ds.specs[static_cast<size_t>(ids[b])];
    for (size_t i = 0; i < src.size(); ++i) dst[b * src.size() + i] = src[i];
  }
  return out;
}

namespace {

std::vector<int> epoch_order(int n, uint64_t seed, long epoch) {
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng::fork(seed, 0xE70C000ULL + static_cast<uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i) {
    int j = rng.below(i + 1);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  return order;
}

std::string checkpoint_name(long epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_ep%04ld.bin", epoch);
  return buf;
}

}  // namespace

TrainStats train_run(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
                     const std::string& resume_path) {
  cfg.validate();
  Dataset train = load_split((fs::path(data_dir) / "train").string());
  if (train.image_size != cfg.image_size || train.spec_bins != cfg.spec_bins ||
      train.spec_frames != cfg.spec_frames) {
    throw DataError("train: dataset dims " + std::to_string(train.image_size) + "/" +
                    std::to_string(train.spec_bins) + "x" + std::to_string(train.spec_frames) +
                    " do not match config");
  }
  int n = static_cast<int>(train.size());
  int steps_per_epoch = n / cfg.batch_size;
  if (steps_per_epoch < 1) throw DataError("train: dataset smaller than one batch");

  std::string note = cfg.divergence_note();
  if (!note.empty()) std::cout << "desk-scale settings differ from the full-scale reference:\n" << note;

  fs::create_directories(out_dir);
  Checkpoint ck;
  bool resumed = !resume_path.empty();
  if (resumed) {
    ck = load_checkpoint(resume_path);
    ck.config = cfg;  // resumed runs follow the current config's horizon
    ck.adam.lr = cfg.lr;
  } else {
    ck = Checkpoint::fresh(cfg);
  }

  std::ofstream log(fs::path(out_dir) / "loss_log.txt", resumed ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("train: cannot write loss log in " + out_dir);

  long total_steps = static_cast<long>(steps_per_epoch) * cfg.epochs;
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, static_cast<long>(cfg.max_steps));

  TrainStats stats;
  FinalMapWeights fw = cfg.final_weights();
  LossConfig lc = cfg.loss_config();
  std::vector<Tensor*> params = ck.model.params();

  long step = static_cast<long>(ck.step);
  bool first_logged = resumed;
  while (step < total_steps) {
    long epoch = step / steps_per_epoch;
    std::vector<int> order = epoch_order(n, cfg.seed, epoch);
    long in_epoch = step % steps_per_epoch;
    for (long bi = in_epoch; bi < steps_per_epoch && step < total_steps; ++bi, ++step) {
      std::vector<int> ids(order.begin() + bi * cfg.batch_size, order.begin() + (bi + 1) * cfg.batch_size);
      Tensor images = batch_images(train, ids);
      Tensor specs = batch_specs(train, ids);

      Tape tape;
      ck.model.track(tape);
      ForwardOut fwd = ck.model.forward(tape, images, specs, fw);
      LossBreakdown loss = compute_losses(tape, fwd, lc);
      Gradients grads = tape.backward(loss.total);

      std::vector<Tensor> gvec;
      gvec.reserve(params.size());
      for (Tensor* p : params) gvec.push_back(grads.at(*p));
      ck.adam.step(params, gvec);

      char line[200];
      std::snprintf(line, sizeof(line), "%ld %.17g %.17g %.17g %.17g\n", step, loss.total.value(),
                    loss.ssl.value(), loss.avpm.value(), loss.sra.value());
      log << line;
      if (!first_logged) {
        stats.first_total = loss.total.value();
        first_logged = true;
      }
      stats.last_total = loss.total.value();
      ++stats.steps;
    }
    ck.step = static_cast<uint64_t>(step);
    long finished_epoch = (step == total_steps && step % steps_per_epoch != 0) ? epoch : epoch + 1;
    if (step % steps_per_epoch == 0 && finished_epoch % cfg.checkpoint_every == 0) {
      save_checkpoint((fs::path(out_dir) / checkpoint_name(finished_epoch)).string(), ck);
    }
    std::cout << "epoch " << finished_epoch << " step " << step << "/" << total_steps << " total "
              << stats.last_total << "\n";
  }
  ck.step = static_cast<uint64_t>(step);
  std::string final_path = (fs::path(out_dir) / "checkpoint_final.bin").string();
  save_checkpoint(final_path, ck);
  stats.final_checkpoint = final_path;
  return stats;
}

}  // namespace avloc
