#include "avloc/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "avloc/encoders.hpp"
#include "avloc/error.hpp"
#include "avloc/metrics.hpp"
#include "avloc/rng.hpp"

namespace fs = std::filesystem;

namespace avloc {

namespace {

constexpr uint32_t kSampleMagic = 0x43535641;  // "AVSC"
constexpr uint32_t kSampleVersion = 1;

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  double c = v * s;
  double hp = h / 60.0;
  double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

struct ObjectFootprint {
  bool is_circle = false;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open bbox
  int cx = 0, cy = 0, r = 0;
  bool covers(int x, int y) const {
    if (!is_circle) return x >= x0 && x < x1 && y >= y0 && y < y1;
    long dx = x - cx, dy = y - cy;
    return dx * dx + dy * dy <= static_cast<long>(r) * r;
  }
};

ObjectFootprint place_object(const SceneSpec& spec, Rng& rng) {
  int isz = spec.image_size;
  double extent = rng.uniform(spec.scale_min, spec.scale_max) * isz;
  ObjectFootprint fp;
  fp.is_circle = rng.below(2) == 1;
  if (fp.is_circle) {
    int r = std::max(2, static_cast<int>(std::lround(extent / 2.0)));
    if (2 * r + 1 > isz) throw std::invalid_argument("generate_scene: object larger than image");
    fp.r = r;
    fp.cx = r + rng.below(isz - 2 * r);
    fp.cy = r + rng.below(isz - 2 * r);
    fp.x0 = fp.cx - r;
    fp.x1 = fp.cx + r + 1;
    fp.y0 = fp.cy - r;
    fp.y1 = fp.cy + r + 1;
  } else {
    int w = std::max(3, static_cast<int>(std::lround(extent * rng.uniform(0.75, 1.25))));
    int h = std::max(3, static_cast<int>(std::lround(extent * rng.uniform(0.75, 1.25))));
    if (w > isz || h > isz) throw std::invalid_argument("generate_scene: object larger than image");
    fp.x0 = rng.below(isz - w + 1);
    fp.y0 = rng.below(isz - h + 1);
    fp.x1 = fp.x0 + w;
    fp.y1 = fp.y0 + h;
  }
  return fp;
}

void draw_object(Tensor& image, const SceneSpec& spec, const ObjectFootprint& fp, int cls, double phase) {
  double rgb[3];
  class_color(cls, spec.num_classes, rgb);
  double freq = 2.0 + cls;
  double theta = M_PI * cls / spec.num_classes;
  double ux = std::cos(theta), uy = std::sin(theta);
  for (int y = fp.y0; y < fp.y1; ++y) {
    for (int x = fp.x0; x < fp.x1; ++x) {
      if (!fp.covers(x, y)) continue;
      double t = 0.7 + 0.3 * std::sin(2.0 * M_PI * freq * (x * ux + y * uy) / spec.image_size + phase);
      for (int ch = 0; ch < 3; ++ch) image.at({y, x, ch}) = rgb[ch] * t;
    }
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("scene spec: num_classes must be >= 2");
  if (image_size < 8 || spec_size < 8) throw std::invalid_argument("scene spec: sizes too small");
  if (!(scale_min > 0.0 && scale_max < 1.0 && scale_min <= scale_max)) {
    throw std::invalid_argument("scene spec: object scales must satisfy 0 < min <= max < 1");
  }
  if (distractor_count < 0) throw std::invalid_argument("scene spec: negative distractor count");
  if (sample_rate <= 0) throw std::invalid_argument("scene spec: bad sample rate");
}

int class_fundamental_bin(const SceneSpec& spec, int class_id) {
  int bin = static_cast<int>(std::lround(5.0 * std::pow(1.35, class_id)));
  return std::min(bin, spec.spec_size - 2);
}

void class_color(int class_id, int num_classes, double rgb[3]) {
  hsv_to_rgb(360.0 * class_id / num_classes, 0.85, 0.95, rgb);
}

LabeledScene generate_scene(const SceneSpec& spec, int index) {
  spec.validate();
  if (index < 0) throw std::invalid_argument("generate_scene: negative index");
  Rng rng = Rng::fork(spec.seed, static_cast<uint64_t>(index));
  int isz = spec.image_size;

  LabeledScene scene;
  scene.class_id = rng.below(spec.num_classes);
  scene.image = Tensor({isz, isz, 3});
  for (int y = 0; y < isz; ++y) {
    for (int x = 0; x < isz; ++x) {
      double v = rng.uniform(0.05, 0.25);
      for (int ch = 0; ch < 3; ++ch) scene.image.at({y, x, ch}) = v;
    }
  }

  // Silent distractors first; the sounding object draws on top so its mask
  // stays exact.
  for (int d = 0; d < spec.distractor_count; ++d) {
    int cls = (scene.class_id + 1 + rng.below(spec.num_classes - 1)) % spec.num_classes;
    ObjectFootprint fp = place_object(spec, rng);
    draw_object(scene.image, spec, fp, cls, rng.uniform(0.0, 2.0 * M_PI));
  }

  ObjectFootprint fp = place_object(spec, rng);
  draw_object(scene.image, spec, fp, scene.class_id, rng.uniform(0.0, 2.0 * M_PI));
  scene.gt_mask.assign(static_cast<size_t>(isz) * isz, 0);
  for (int y = fp.y0; y < fp.y1; ++y) {
    for (int x = fp.x0; x < fp.x1; ++x) {
      if (fp.covers(x, y)) scene.gt_mask[static_cast<size_t>(y) * isz + x] = 1;
    }
  }
  scene.bbox_x0 = fp.x0;
  scene.bbox_y0 = fp.y0;
  scene.bbox_x1 = fp.x1;
  scene.bbox_y1 = fp.y1;
  scene.is_circle = fp.is_circle;
  scene.cx = fp.cx;
  scene.cy = fp.cy;
  scene.radius = fp.r;

  // Harmonic stack at the class fundamental plus weak noise.
  int window = spec.stft_window();
  int f0_bin = class_fundamental_bin(spec, scene.class_id);
  double bin_hz = static_cast<double>(spec.sample_rate) / window;
  std::vector<double> wave(static_cast<size_t>(spec.waveform_len()), 0.0);
  for (int m = 1; m <= 4; ++m) {
    if (m * f0_bin >= spec.spec_size - 1) break;
    double f = m * f0_bin * bin_hz;
    double amp = 0.6 / m;
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (size_t t = 0; t < wave.size(); ++t) {
      wave[t] += amp * std::sin(2.0 * M_PI * f * static_cast<double>(t) / spec.sample_rate + phase);
    }
  }
  for (size_t t = 0; t < wave.size(); ++t) wave[t] += 0.02 * rng.normal();

  Tensor spect = make_spectrogram(wave, spec.sample_rate, window, spec.stft_hop());
  scene.spectrogram = Tensor({spect.dim(1), spect.dim(2), 1}, spect.vec());
  return scene;
}

Split generate_split(const SceneSpec& spec, int n_train, int n_test) {
  spec.validate();
  if (n_train <= 0 || n_test <= 0) throw std::invalid_argument("generate_split: split sizes must be positive");
  Split s;
  s.train.resize(static_cast<size_t>(n_train));
  s.test.resize(static_cast<size_t>(n_test));
  for (int i = 0; i < n_train; ++i) s.train[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n_test; ++i) s.test[static_cast<size_t>(i)] = n_train + i;
  return s;
}

void dump_split(const SceneSpec& spec, const std::vector<int>& indices, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "avloc-dataset v1\n";
  std::map<int, std::vector<AnnotBox>> annots;

  bool dims_written = false;
  std::ostringstream rows;
  for (size_t k = 0; k < indices.size(); ++k) {
    LabeledScene scene = generate_scene(spec, indices[k]);
    int H = scene.image.dim(0), W = scene.image.dim(1);
    int bins = scene.spectrogram.dim(0), frames = scene.spectrogram.dim(1);
    if (!dims_written) {
      manifest << "image_size " << H << "\n"
               << "spec_bins " << bins << "\n"
               << "spec_frames " << frames << "\n"
               << "num_classes " << spec.num_classes << "\n"
               << "count " << indices.size() << "\n";
      dims_written = true;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.bin", k);
    rows << k << " " << scene.class_id << " " << name << "\n";

    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw DataError("dump_split: cannot write sample file in " + dir);
    auto put_u32 = [&out](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_i32 = [&out](int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kSampleMagic);
    put_u32(kSampleVersion);
    put_i32(scene.class_id);
    put_i32(H);
    put_i32(W);
    put_i32(bins);
    put_i32(frames);
    std::vector<float> buf(static_cast<size_t>(H) * W * 3);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(scene.image.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<long>(buf.size() * 4));
    buf.resize(static_cast<size_t>(bins) * frames);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(scene.spectrogram.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<long>(buf.size() * 4));
    out.write(reinterpret_cast<const char*>(scene.gt_mask.data()), static_cast<long>(scene.gt_mask.size()));

    // mask bounding box as a single-annotator record
    int x0 = W, y0 = H, x1 = 0, y1 = 0;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (!scene.gt_mask[static_cast<size_t>(y) * W + x]) continue;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
      }
    }
    annots[static_cast<int>(k)] = {AnnotBox{0, x0, y0, x1, y1}};
  }

  std::ofstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw DataError("dump_split: cannot write manifest in " + dir);
  mf << manifest.str() << rows.str();
  write_annotations((fs::path(dir) / "annotations.txt").string(), annots);
}

Dataset load_split(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw DataError("load_split: cannot open manifest in " + dir);
  std::string header;
  std::getline(mf, header);
  if (header != "avloc-dataset v1") throw DataError("load_split: unsupported manifest header '" + header + "'");
  Dataset ds;
  int count = 0;
  for (int i = 0; i < 5; ++i) {
    std::string key;
    mf >> key;
    if (key == "image_size") {
      mf >> ds.image_size;
    } else if (key == "spec_bins") {
      mf >> ds.spec_bins;
    } else if (key == "spec_frames") {
      mf >> ds.spec_frames;
    } else if (key == "num_classes") {
      mf >> ds.num_classes;
    } else if (key == "count") {
      mf >> count;
    } else {
      throw DataError("load_split: unexpected manifest key '" + key + "'");
    }
  }
  for (int k = 0; k < count; ++k) {
    int idx, cls;
    std::string name;
    if (!(mf >> idx >> cls >> name)) throw DataError("load_split: truncated manifest");
    std::ifstream in(fs::path(dir) / name, std::ios::binary);
    if (!in) throw DataError("load_split: missing sample file " + name);
    uint32_t magic = 0, version = 0;
    int32_t fcls = 0, H = 0, W = 0, bins = 0, frames = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&fcls), 4);
    in.read(reinterpret_cast<char*>(&H), 4);
    in.read(reinterpret_cast<char*>(&W), 4);
    in.read(reinterpret_cast<char*>(&bins), 4);
    in.read(reinterpret_cast<char*>(&frames), 4);
    if (magic != kSampleMagic || version != kSampleVersion) {
      throw DataError("load_split: bad sample header in " + name);
    }
    if (H != ds.image_size || W != ds.image_size || bins != ds.spec_bins || frames != ds.spec_frames ||
        fcls != cls) {
      throw DataError("load_split: sample " + name + " disagrees with manifest");
    }
    std::vector<float> img(static_cast<size_t>(H) * W * 3), spc(static_cast<size_t>(bins) * frames);
    std::vector<uint8_t> mask(static_cast<size_t>(H) * W);
    in.read(reinterpret_cast<char*>(img.data()), static_cast<long>(img.size() * 4));
    in.read(reinterpret_cast<char*>(spc.data()), static_cast<long>(spc.size() * 4));
    in.read(reinterpret_cast<char*>(mask.data()), static_cast<long>(mask.size()));
    if (!in) throw DataError("load_split: truncated sample " + name);
    ds.class_ids.push_back(cls);
    ds.images.push_back(std::move(img));
    ds.specs.push_back(std::move(spc));
    ds.masks.push_back(std::move(mask));
  }
  return ds;
}

}  // namespace avloc
