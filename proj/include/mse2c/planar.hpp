#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mse2c/rng.hpp"
#include "mse2c/types.hpp"

namespace mse2c {

struct Obstacle {
  double x = 0, y = 0, radius = 0;
};

// Square black-and-white grid world. Pixel (ix, iy) has its center at the
// integer coordinates (ix, iy); the agent and the obstacles are white disks.
struct PlanarConfig {
  int image_width = 40;
  std::vector<Obstacle> obstacles;
  double agent_radius = 1.5;
  double action_max = 3.0;
  std::uint64_t seed = 0;
};

// 40x40 world with six obstacles in two columns.
PlanarConfig default_planar_config();

void validate(const PlanarConfig& cfg);

struct AgentState {
  double x = 0, y = 0;
};

// Inside the image and clear of every inflated obstacle disk.
bool collision_free(const AgentState& state, const PlanarConfig& cfg);

// Throws ValidationError for colliding states.
Image render(const AgentState& state, const PlanarConfig& cfg);

// Blocked moves leave the state unchanged. Throws ValidationError when an
// action component exceeds the per-axis bound.
AgentState step(const AgentState& state, const Eigen::Vector2d& action, const PlanarConfig& cfg);

// K+1 rendered frames and K actions.
struct TrajectorySample {
  std::vector<Image> frames;
  std::vector<Eigen::Vector2d> actions;
};

struct SampledTrajectory {
  TrajectorySample sample;
  std::vector<AgentState> states;  // underlying states, one per frame
};

// Uniform collision-free start (rejection sampling), uniform actions.
SampledTrajectory sample_trajectory(Rng& rng, int k, const PlanarConfig& cfg);

// All collision-free integer positions, row-major (y outer, x inner).
std::vector<AgentState> enumerate_states(const PlanarConfig& cfg);

}  // namespace mse2c
