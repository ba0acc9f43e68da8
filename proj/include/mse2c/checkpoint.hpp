#pragma once

#include <string>

#include "mse2c/models.hpp"

namespace mse2c {

// A checkpoint is <stem>.json (manifest: variant, shapes, hyperparameters)
// plus <stem>.bin (parameters as little-endian 32-bit floats, groups in
// encoder/dynamics/decoder order).
void save_checkpoint(const ModelParams<double>& model, const std::string& path_stem);
ModelParams<double> load_checkpoint(const std::string& path_stem);

}  // namespace mse2c
