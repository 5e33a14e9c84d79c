#pragma once

#include <string>
#include <vector>

#include "avloc/tensor.hpp"

namespace avloc {

// Binary PGM (P5); the map is min-max normalized to [0,255] per image.
void write_pgm(const std::string& path, const Tensor& map2d);

// Binary PPM (P6); values expected in [0,1], clamped on write.
void write_ppm(const std::string& path, const Tensor& image);

// Binary PPM (P6), 8-bit -> [H,W,3] in [0,1].
Tensor read_ppm(const std::string& path);

// Headerless 16-bit little-endian PCM, mono, scaled to [-1,1].
std::vector<double> read_pcm_s16le(const std::string& path);
void write_pcm_s16le(const std::string& path, const std::vector<double>& waveform);

}  // namespace avloc
