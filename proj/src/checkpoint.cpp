#include "avloc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "avloc/error.hpp"

namespace avloc {

namespace {

constexpr uint32_t kMagic = 0x4B435641;  // "AVCK"
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

uint64_t get_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<uint32_t>(t.rank()));
  for (int d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<long>(t.size()) * 8);
}

Tensor get_tensor(std::istream& in) {
  uint32_t rank = get_u32(in);
  if (rank > 8) throw DataError("checkpoint: implausible tensor rank");
  std::vector<int> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(get_u32(in));
  Tensor t(shape.empty() ? std::vector<int>{} : shape);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<long>(t.size()) * 8);
  if (!in) throw DataError("checkpoint: truncated tensor block");
  return t;
}

void assign_like(Tensor& dst, Tensor src, const char* what) {
  if (dst.shape() != src.shape()) {
    throw DataError(std::string("checkpoint: ") + what + " shape " + shape_str(src.shape()) +
                    " does not match configured " + shape_str(dst.shape()));
  }
  dst = std::move(src);
}

}  // namespace

Checkpoint Checkpoint::fresh(const RunConfig& cfg) {
  Checkpoint ck;
  ck.config = cfg;
  ck.model = Model::init(cfg.model_config(), cfg.seed);
  ck.adam.lr = cfg.lr;
  ck.adam.init(ck.model.params());
  ck.rng_state = cfg.seed;
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  put_u32(out, kMagic);
  put_u32(out, kVersion);
  std::string cfg = ck.config.to_text();
  put_u32(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<long>(cfg.size()));
  put_u64(out, ck.step);
  put_u64(out, ck.rng_state);
  put_u64(out, static_cast<uint64_t>(ck.adam.t));
  const auto params = ck.model.params();
  put_u32(out, static_cast<uint32_t>(params.size()));
  for (const Tensor* p : params) put_tensor(out, *p);
  for (const Tensor& t : ck.adam.m) put_tensor(out, t);
  for (const Tensor& t : ck.adam.v) put_tensor(out, t);
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  if (get_u32(in) != kMagic) throw DataError("checkpoint: bad magic in " + path);
  if (get_u32(in) != kVersion) throw DataError("checkpoint: unsupported version in " + path);
  uint32_t cfg_len = get_u32(in);
  if (cfg_len > (1u << 20)) throw DataError("checkpoint: implausible config block");
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);

  Checkpoint ck;
  ck.config = RunConfig::parse(cfg_text);
  ck.model = Model::init(ck.config.model_config(), ck.config.seed);
  ck.adam.lr = ck.config.lr;
  ck.adam.init(ck.model.params());

  ck.step = get_u64(in);
  ck.rng_state = get_u64(in);
  ck.adam.t = static_cast<long>(get_u64(in));
  uint32_t n_params = get_u32(in);
  auto params = ck.model.params();
  if (n_params != params.size()) throw DataError("checkpoint: parameter count mismatch in " + path);
  for (Tensor* p : params) assign_like(*p, get_tensor(in), "parameter");
  for (Tensor& t : ck.adam.m) assign_like(t, get_tensor(in), "adam m");
  for (Tensor& t : ck.adam.v) assign_like(t, get_tensor(in), "adam v");
  if (!in) throw DataError("checkpoint: truncated file " + path);
  return ck;
}

}  // namespace avloc
