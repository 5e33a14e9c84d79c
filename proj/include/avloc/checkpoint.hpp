#pragma once

#include <string>

#include "avloc/config.hpp"
#include "avloc/trainer.hpp"

namespace avloc {

struct Checkpoint {
  RunConfig config;
  Model model;
  Adam adam;
  uint64_t step = 0;
  uint64_t rng_state = 0;

  static Checkpoint fresh(const RunConfig& cfg);
};

// Raw little-endian doubles framed by shapes; save -> load -> save is
// byte-identical.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace avloc
