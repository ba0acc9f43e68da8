#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mse2c/planar.hpp"
#include "mse2c/training.hpp"

namespace mse2c {

// One configuration file drives the whole pipeline; command-line overrides
// use flat dotted keys ("train.k=5"). configs/default.json in the repository
// documents every field.
struct RunConfig {
  PlanarConfig planar = default_planar_config();
  int data_n = 5000;
  int data_k = 5;
  std::uint64_t data_seed = 7;
  TrainConfig train;
};

nlohmann::json default_run_config_json();
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Empty path loads the built-in defaults. Overrides are "dotted.key=value"
// with JSON-parsed values (bare strings allowed). Validates every field.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace mse2c
