#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "avloc/ablate.hpp"
#include "avloc/checkpoint.hpp"
#include "avloc/error.hpp"
#include "avloc/evaluate.hpp"
#include "avloc/imageio.hpp"
#include "avloc/trainer.hpp"

namespace fs = std::filesystem;
using namespace avloc;

namespace {

std::string out_root() {
  const char* env = std::getenv("AVLOC_OUT_ROOT");
  return env && *env ? env : "out";
}

RunConfig load_config(const std::string& path, bool seed_set, uint64_t seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::from_file(path);
  if (seed_set) cfg.seed = seed;
  return cfg;
}

void cmd_gen_data(const RunConfig& cfg, const std::string& out) {
  SceneSpec spec = cfg.scene_spec();
  Split split = generate_split(spec, cfg.train_scenes, cfg.test_scenes);
  dump_split(spec, split.train, (fs::path(out) / "train").string());
  dump_split(spec, split.test, (fs::path(out) / "test").string());
  std::cout << "wrote " << split.train.size() << " train / " << split.test.size() << " test scenes to "
            << out << "\n";
}

void cmd_train(const RunConfig& cfg, const std::string& data, const std::string& out,
               const std::string& resume) {
  TrainStats stats = train_run(cfg, data, out, resume);
  std::cout << "trained " << stats.steps << " steps, total loss " << stats.first_total << " -> "
            << stats.last_total << "\n"
            << "final checkpoint: " << stats.final_checkpoint << "\n";
}

void cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& report,
              const std::string& annotations) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  Dataset test = load_split((fs::path(data) / "test").string());
  EvalOptions opt;
  opt.act_thresh = ck.config.act_thresh;
  opt.batch_size = ck.config.batch_size;
  opt.annotations_path = annotations;
  EvalReport rep = evaluate_model(ck.model, ck.config.final_weights(), test, opt);
  fs::create_directories(fs::path(report).parent_path().empty() ? "." : fs::path(report).parent_path());
  write_report(report, rep, opt.act_thresh);
  std::cout << "samples " << rep.samples << "  ciou_0.5 " << rep.ciou_at_half << "  auc " << rep.auc
            << "  mciou " << rep.mciou << "\n"
            << "report: " << report << "\n";
}

void cmd_infer(const std::string& ckpt_path, const std::string& image_path, const std::string& audio_path,
               const std::string& out) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  const ModelConfig& mc = ck.model.cfg;
  fs::create_directories(out);

  Tensor img = read_ppm(image_path);
  Tape prep(false);
  if (img.dim(0) != mc.image_size || img.dim(1) != mc.image_size) {
    Tensor batched = prep.reshape(img, {1, img.dim(0), img.dim(1), 3});
    img = prep.bilinear_resize(batched, mc.image_size, mc.image_size);
  } else {
    img = prep.reshape(img, {1, mc.image_size, mc.image_size, 3});
  }

  std::vector<double> wave = read_pcm_s16le(audio_path);
  int window = 2 * (mc.spec_bins - 1);
  int hop = window / 2;
  if (static_cast<int>(wave.size()) < window) {
    throw DataError("infer: audio shorter than one analysis window (" + std::to_string(window) + " samples)");
  }
  Tensor spec = make_spectrogram(wave, ck.config.sample_rate, window, hop);
  if (spec.dim(1) != mc.spec_bins || spec.dim(2) != mc.spec_frames) {
    Tensor flat = prep.reshape(spec, {1, spec.dim(1), spec.dim(2)});
    spec = prep.reshape(prep.bilinear_resize(flat, mc.spec_bins, mc.spec_frames),
                        {1, mc.spec_bins, mc.spec_frames, 1});
  }

  Tape tape(false);
  ForwardOut fwd = ck.model.forward(tape, img, spec, ck.config.final_weights());

  auto upsample = [&](const Tensor& maps) {
    Tensor up = tape.bilinear_resize(maps, mc.image_size, mc.image_size);
    return tape.reshape(up, {mc.image_size, mc.image_size});
  };
  Tensor m_v = upsample(fwd.s1.M_v);
  Tensor m_a = upsample(fwd.s1.M_a);
  Tensor m_av = upsample(fwd.s1.M_av);
  Tensor m_v_att = upsample(fwd.s2.M_v_att);
  Tensor m_final = upsample(fwd.M_final);
  write_pgm((fs::path(out) / "m_v.pgm").string(), m_v);
  write_pgm((fs::path(out) / "m_a.pgm").string(), m_a);
  write_pgm((fs::path(out) / "m_av.pgm").string(), m_av);
  write_pgm((fs::path(out) / "m_v_att.pgm").string(), m_v_att);
  write_pgm((fs::path(out) / "m_final.pgm").string(), m_final);

  // composite: the input image tinted by the final map
  double lo = m_final.data()[0], hi = m_final.data()[0];
  for (int i = 0; i < m_final.size(); ++i) {
    lo = std::min(lo, m_final.data()[i]);
    hi = std::max(hi, m_final.data()[i]);
  }
  double range = hi - lo;
  Tensor overlay({mc.image_size, mc.image_size, 3});
  for (int y = 0; y < mc.image_size; ++y) {
    for (int x = 0; x < mc.image_size; ++x) {
      double heat = range > 0.0 ? (m_final.at({y, x}) - lo) / range : 0.0;
      overlay.at({y, x, 0}) = 0.45 * img.at({0, y, x, 0}) + 0.55 * heat;
      overlay.at({y, x, 1}) = 0.45 * img.at({0, y, x, 1}) + 0.15 * heat;
      overlay.at({y, x, 2}) = 0.45 * img.at({0, y, x, 2});
    }
  }
  write_ppm((fs::path(out) / "overlay.ppm").string(), overlay);
  std::cout << "wrote 6 maps to " << out << "\n";
}

void cmd_ablate(const RunConfig& cfg, const std::string& data, const std::string& sweep_path,
                const std::string& out) {
  SweepSpec sweep = sweep_path.empty() ? SweepSpec{} : SweepSpec::from_file(sweep_path);
  std::vector<AblateRow> rows = run_ablation(cfg, sweep, data, out);
  std::string table = (fs::path(out) / "ablation.tsv").string();
  write_ablation_table(table, rows);
  std::cout << "wrote " << rows.size() << " rows to " << table << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage audio-visual sound source localization"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, ckpt, resume, report, annotations, image_path, audio_path,
      sweep_path;
  uint64_t seed = 0;
  bool seed_set = false;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "run config file");
  gen->add_option("--out", out_dir, "output dataset directory");
  add_seed(gen);

  CLI::App* train = app.add_subcommand("train", "train on a generated dataset");
  train->add_option("--config", config_path, "run config file");
  train->add_option("--data", data_dir, "dataset directory (holds train/)")->required();
  train->add_option("--out", out_dir, "output directory for logs and checkpoints");
  train->add_option("--resume", resume, "checkpoint to continue from");
  add_seed(train);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory (holds test/)")->required();
  eval->add_option("--report", report, "report output path");
  eval->add_option("--annotations", annotations, "score against a box annotation file instead of masks");

  CLI::App* infer = app.add_subcommand("infer", "localize one image/audio pair");
  infer->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  infer->add_option("--image", image_path, "input image (binary PPM)")->required();
  infer->add_option("--audio", audio_path, "input audio (raw 16-bit LE PCM)")->required();
  infer->add_option("--out", out_dir, "output directory for heatmaps");

  CLI::App* ablate = app.add_subcommand("ablate", "loss-combination and map-weight sweep");
  ablate->add_option("--config", config_path, "run config file");
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--sweep", sweep_path, "sweep spec file (defaults to the standard grid)");
  ablate->add_option("--out", out_dir, "output directory");
  add_seed(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      if (out_dir.empty()) out_dir = (fs::path(out_root()) / "dataset").string();
      cmd_gen_data(load_config(config_path, seed_set, seed), out_dir);
    } else if (train->parsed()) {
      if (out_dir.empty()) out_dir = (fs::path(out_root()) / "train").string();
      cmd_train(load_config(config_path, seed_set, seed), data_dir, out_dir, resume);
    } else if (eval->parsed()) {
      if (report.empty()) report = (fs::path(out_root()) / "report.txt").string();
      cmd_eval(ckpt, data_dir, report, annotations);
    } else if (infer->parsed()) {
      if (out_dir.empty()) out_dir = (fs::path(out_root()) / "infer").string();
      cmd_infer(ckpt, image_path, audio_path, out_dir);
    } else if (ablate->parsed()) {
      if (out_dir.empty()) out_dir = (fs::path(out_root()) / "ablate").string();
      cmd_ablate(load_config(config_path, seed_set, seed), data_dir, sweep_path, out_dir);
    }
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
