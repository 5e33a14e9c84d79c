#include "avloc/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "avloc/error.hpp"

namespace avloc {

void write_pgm(const std::string& path, const Tensor& map2d) {
  if (map2d.rank() != 2) throw std::invalid_argument("write_pgm: expected [H,W], got " + shape_str(map2d.shape()));
  int H = map2d.dim(0), W = map2d.dim(1);
  double lo = map2d.data()[0], hi = map2d.data()[0];
  for (int i = 0; i < map2d.size(); ++i) {
    lo = std::min(lo, map2d.data()[i]);
    hi = std::max(hi, map2d.data()[i]);
  }
  double range = hi - lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_pgm: cannot write " + path);
  out << "P5\n" << W << " " << H << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(W));
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double v = range > 0.0 ? (map2d.at({y, x}) - lo) / range : 0.0;
      row[static_cast<size_t>(x)] = static_cast<uint8_t>(std::lround(255.0 * v));
    }
    out.write(reinterpret_cast<const char*>(row.data()), W);
  }
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw std::invalid_argument("write_ppm: expected [H,W,3], got " + shape_str(image.shape()));
  }
  int H = image.dim(0), W = image.dim(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_ppm: cannot write " + path);
  out << "P6\n" << W << " " << H << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(W) * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(image.at({y, x, c}), 0.0, 1.0);
        row[static_cast<size_t>(x) * 3 + static_cast<size_t>(c)] =
            static_cast<uint8_t>(std::lround(255.0 * v));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<long>(row.size()));
  }
}

namespace {

int read_pnm_int(std::istream& in) {
  // skips whitespace and '#' comments
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  int v = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw DataError("read_ppm: malformed header");
  return v;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_ppm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw DataError("read_ppm: " + path + " is not binary PPM (P6)");
  int W = read_pnm_int(in);
  int H = read_pnm_int(in);
  int maxv = read_pnm_int(in);
  if (W <= 0 || H <= 0 || maxv != 255) throw DataError("read_ppm: unsupported header in " + path);
  std::vector<uint8_t> buf(static_cast<size_t>(H) * W * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<long>(buf.size()));
  if (!in) throw DataError("read_ppm: truncated pixel data in " + path);
  Tensor img({H, W, 3});
  for (size_t i = 0; i < buf.size(); ++i) img.data()[i] = buf[i] / 255.0;
  return img;
}

std::vector<double> read_pcm_s16le(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_pcm: cannot open " + path);
  in.seekg(0, std::ios::end);
  long bytes = in.tellg();
  in.seekg(0);
  if (bytes <= 0 || bytes % 2 != 0) throw DataError("read_pcm: " + path + " is not 16-bit sample data");
  std::vector<int16_t> raw(static_cast<size_t>(bytes / 2));
  in.read(reinterpret_cast<char*>(raw.data()), bytes);
  if (!in) throw DataError("read_pcm: short read on " + path);
  std::vector<double> wave(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) wave[i] = raw[i] / 32768.0;
  return wave;
}

void write_pcm_s16le(const std::string& path, const std::vector<double>& waveform) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_pcm: cannot write " + path);
  std::vector<int16_t> raw(waveform.size());
  for (size_t i = 0; i < waveform.size(); ++i) {
    double v = std::clamp(waveform[i], -1.0, 1.0);
    raw[i] = static_cast<int16_t>(std::lround(v * 32767.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<long>(raw.size() * 2));
}

}  // namespace avloc
