#pragma once

#include <stdexcept>
#include <string>

namespace mse2c {

// Bad inputs, shape mismatches, config violations. CLI maps these to exit 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem and format failures. Messages carry the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients during training. CLI maps to exit 2.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mse2c
