#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mse2c/dataset.hpp"
#include "mse2c/losses.hpp"
#include "mse2c/models.hpp"

namespace mse2c {

enum class Optimizer { PlainSgd, AdaptiveMoment };

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  int k = 5;
  int latent_dim = 2;
  int epochs = 30;
  double learning_rate = 1e-3;
  double lambda1 = 1.0;
  double lambda2 = 0.25;
  double epsilon = 0.01;  // Gershgorin margin
  int batch_size = 128;
  Optimizer optimizer = Optimizer::PlainSgd;
  std::uint64_t seed = 1;
  double sigma_w2 = 0.01;
  DynamicsVariant variant = DynamicsVariant::LocalLinear;
  std::vector<int> hidden_encoder = {150, 150};
  std::vector<int> hidden_dynamics = {100, 100};
  std::vector<int> hidden_decoder = {150, 150};
  double grad_clip = 0.0;    // global norm across all groups, 0 disables
  int checkpoint_every = 0;  // epochs between snapshots, 0 = final only

  LossWeights<double> loss_weights() const { return {lambda1, lambda2, epsilon}; }
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown<double> losses;
  double wall_ms = 0;
  bool diverged = false;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::string divergence_message;
};

struct TrainResult {
  ModelParams<double> model;
  TrainLog log;
};

// Adaptive-moment state per parameter group; unused for plain SGD.
struct OptimizerState {
  VecX<double> m_phi, v_phi, m_psi, v_psi, m_theta, v_theta;
  long step = 0;

  static OptimizerState zeros_like(const ModelParams<double>& model);
};

Batch<double> make_batch(const Dataset& ds, const std::vector<int>& indices);

// One gradient step over a batch: phi and psi take the composite gradient,
// theta the upper-bound gradient. Throws DivergenceError on non-finite
// losses or gradients.
LossBreakdown<double> update_step(ModelParams<double>& model, const Batch<double>& batch,
                                  const TrainConfig& cfg, OptimizerState& opt, Rng& rng);

// Full fitting loop. Writes newline-delimited JSON metrics per epoch when
// metrics_path is non-empty, periodic and final checkpoints when
// checkpoint_stem is non-empty. A divergence aborts the loop and is reported
// through the log, not thrown.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset,
                  const std::string& checkpoint_stem = "", const std::string& metrics_path = "");

}  // namespace mse2c
