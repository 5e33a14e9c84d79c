#pragma once

#include <stdexcept>

namespace avloc {

// Unreadable or malformed external data: files, datasets, checkpoints.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or otherwise numerically invalid state.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace avloc
