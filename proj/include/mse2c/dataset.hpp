#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mse2c/planar.hpp"

namespace mse2c {

// On disk a dataset is a pair of files sharing a stem: <stem>.json holds the
// manifest, <stem>.bin the payload. Per sample the payload is K+1 frames of
// width^2 bytes (0/1) followed by K actions as little-endian 32-bit floats.
struct Dataset {
  int n = 0;
  int k = 0;
  int width = 0;
  int action_dim = 2;
  std::uint64_t seed = 0;
  PlanarConfig planar;
  std::vector<TrajectorySample> samples;
};

// Sample i is driven by a stream derived from (seed, i), so any sample can be
// regenerated without replaying the run.
SampledTrajectory generate_sample(const PlanarConfig& cfg, int k, std::uint64_t seed, int index);

Dataset generate_dataset(int n, int k, const PlanarConfig& cfg, std::uint64_t seed,
                         const std::string& path_stem);

void save_dataset(const Dataset& ds, const std::string& path_stem);
Dataset load_dataset(const std::string& path_stem);

// Binary P5, one byte per pixel, {0,1} mapped to {0,255}.
void write_pgm(const Image& frame, int width, const std::string& path);

}  // namespace mse2c
