#include "mse2c/planar.hpp"

#include <cmath>

#include "mse2c/errors.hpp"

namespace mse2c {

PlanarConfig default_planar_config() {
  PlanarConfig cfg;
  cfg.image_width = 40;
  cfg.agent_radius = 1.5;
  cfg.action_max = 3.0;
  cfg.obstacles = {
      {12.0, 8.0, 2.5},  {12.0, 20.0, 2.5}, {12.0, 32.0, 2.5},
      {28.0, 8.0, 2.5},  {28.0, 20.0, 2.5}, {28.0, 32.0, 2.5},
  };
  return cfg;
}

void validate(const PlanarConfig& cfg) {
  if (cfg.image_width < 8) throw ValidationError("planar: image_width must be >= 8");
  if (!(cfg.agent_radius > 0)) throw ValidationError("planar: agent_radius must be > 0");
  if (!(cfg.action_max > 0)) throw ValidationError("planar: action_max must be > 0");
  const double w = static_cast<double>(cfg.image_width);
  for (const auto& ob : cfg.obstacles) {
    if (ob.x < 0 || ob.x >= w || ob.y < 0 || ob.y >= w)
      throw ValidationError("planar: obstacle center outside image");
    if (!(ob.radius > 0)) throw ValidationError("planar: obstacle radius must be > 0");
  }
  const double span = static_cast<double>(cfg.image_width - 1);
  if (2.0 * cfg.agent_radius > span)
    throw ValidationError("planar: agent does not fit inside the image");
}

namespace {

inline double sq(double v) { return v * v; }

}  // namespace

bool collision_free(const AgentState& state, const PlanarConfig& cfg) {
  const double r = cfg.agent_radius;
  const double hi = static_cast<double>(cfg.image_width - 1);
  if (state.x - r < 0.0 || state.x + r > hi || state.y - r < 0.0 || state.y + r > hi)
    return false;
  for (const auto& ob : cfg.obstacles) {
    const double min_dist = r + ob.radius;
    if (sq(state.x - ob.x) + sq(state.y - ob.y) <= sq(min_dist)) return false;
  }
  return true;
}

Image render(const AgentState& state, const PlanarConfig& cfg) {
  if (!collision_free(state, cfg)) throw ValidationError("render: state collides");
  const int w = cfg.image_width;
  Image img(w * w);
  const double ar2 = sq(cfg.agent_radius);
  for (int iy = 0; iy < w; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const double px = static_cast<double>(ix);
      const double py = static_cast<double>(iy);
      bool lit = sq(px - state.x) + sq(py - state.y) <= ar2;
      for (std::size_t o = 0; !lit && o < cfg.obstacles.size(); ++o) {
        const auto& ob = cfg.obstacles[o];
        lit = sq(px - ob.x) + sq(py - ob.y) <= sq(ob.radius);
      }
      img[iy * w + ix] = lit ? 1 : 0;
    }
  }
  return img;
}

AgentState step(const AgentState& state, const Eigen::Vector2d& action, const PlanarConfig& cfg) {
  if (std::abs(action.x()) > cfg.action_max || std::abs(action.y()) > cfg.action_max)
    throw ValidationError("step: action component out of bounds");
  const AgentState candidate{state.x + action.x(), state.y + action.y()};
  return collision_free(candidate, cfg) ? candidate : state;
}

SampledTrajectory sample_trajectory(Rng& rng, int k, const PlanarConfig& cfg) {
  if (k < 1) throw ValidationError("sample_trajectory: k must be >= 1");
  const double r = cfg.agent_radius;
  const double hi = static_cast<double>(cfg.image_width - 1);

  AgentState state;
  do {
    state.x = rng.uniform(r, hi - r);
    state.y = rng.uniform(r, hi - r);
  } while (!collision_free(state, cfg));

  SampledTrajectory out;
  out.states.push_back(state);
  out.sample.frames.push_back(render(state, cfg));
  for (int i = 0; i < k; ++i) {
    const Eigen::Vector2d action(rng.uniform(-cfg.action_max, cfg.action_max),
                                 rng.uniform(-cfg.action_max, cfg.action_max));
    state = step(state, action, cfg);
    out.sample.actions.push_back(action);
    out.states.push_back(state);
    out.sample.frames.push_back(render(state, cfg));
  }
  return out;
}

std::vector<AgentState> enumerate_states(const PlanarConfig& cfg) {
  std::vector<AgentState> states;
  for (int y = 0; y < cfg.image_width; ++y) {
    for (int x = 0; x < cfg.image_width; ++x) {
      const AgentState s{static_cast<double>(x), static_cast<double>(y)};
      if (collision_free(s, cfg)) states.push_back(s);
    }
  }
  return states;
}

}  // namespace mse2c
