#include "mse2c/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mse2c/checkpoint.hpp"
#include "mse2c/errors.hpp"

namespace mse2c {

namespace {

using nlohmann::json;

bool all_finite(const VecX<double>& v) { return v.allFinite(); }

bool breakdown_finite(const LossBreakdown<double>& b) {
  return std::isfinite(b.upper) && std::isfinite(b.kl_prior) && std::isfinite(b.consistency) &&
         std::isfinite(b.stability) && std::isfinite(b.composite_phi_psi) &&
         std::isfinite(b.composite_theta) && b.reconstruction_terms.allFinite();
}

void adam_update(VecX<double>& params, const VecX<double>& grad, VecX<double>& m, VecX<double>& v,
                 long step, double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.array().square().matrix();
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
  params.array() -=
      lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + kEps);
}

json breakdown_to_json(const LossBreakdown<double>& b) {
  std::vector<double> recon(b.reconstruction_terms.data(),
                            b.reconstruction_terms.data() + b.reconstruction_terms.size());
  return {{"upper", b.upper},
          {"reconstruction_terms", recon},
          {"kl_prior", b.kl_prior},
          {"consistency", b.consistency},
          {"stability", b.stability},
          {"composite_phi_psi", b.composite_phi_psi},
          {"composite_theta", b.composite_theta}};
}

}  // namespace

std::string to_string(Optimizer opt) {
  return opt == Optimizer::PlainSgd ? "plain-sgd" : "adaptive-moment";
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "plain-sgd") return Optimizer::PlainSgd;
  if (s == "adaptive-moment") return Optimizer::AdaptiveMoment;
  throw ValidationError("unknown optimizer: " + s);
}

void validate(const TrainConfig& cfg) {
  if (cfg.k < 1) throw ValidationError("train config: k must be >= 1");
  if (cfg.latent_dim < 1) throw ValidationError("train config: latent_dim must be >= 1");
  if (cfg.epochs < 0) throw ValidationError("train config: epochs must be >= 0");
  if (!(cfg.learning_rate >= 0)) throw ValidationError("train config: learning_rate must be >= 0");
  if (cfg.lambda1 < 0 || cfg.lambda2 < 0)
    throw ValidationError("train config: lambda weights must be >= 0");
  if (!(cfg.epsilon > 0)) throw ValidationError("train config: epsilon must be > 0");
  if (cfg.batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (!(cfg.sigma_w2 > 0)) throw ValidationError("train config: sigma_w2 must be > 0");
  if (cfg.grad_clip < 0) throw ValidationError("train config: grad_clip must be >= 0");
  // lambda2 > 0 additionally requires latent_dim == action_dim; the action
  // dimension comes from the dataset, so train() checks it.
  if (cfg.lambda2 > 0 && cfg.variant == DynamicsVariant::NonLinear)
    throw ValidationError("train config: stability loss needs a linearized dynamics variant");
}

OptimizerState OptimizerState::zeros_like(const ModelParams<double>& model) {
  OptimizerState s;
  s.m_phi = VecX<double>::Zero(model.phi().size());
  s.v_phi = VecX<double>::Zero(model.phi().size());
  s.m_psi = VecX<double>::Zero(model.psi().size());
  s.v_psi = VecX<double>::Zero(model.psi().size());
  s.m_theta = VecX<double>::Zero(model.theta().size());
  s.v_theta = VecX<double>::Zero(model.theta().size());
  return s;
}

Batch<double> make_batch(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw ValidationError("make_batch: empty batch");
  const int n = static_cast<int>(indices.size());
  const int pixels = ds.width * ds.width;
  Batch<double> batch;
  batch.frames.assign(ds.k + 1, MatX<double>(pixels, n));
  batch.actions.assign(ds.k, MatX<double>(2, n));
  for (int c = 0; c < n; ++c) {
    const auto& sample = ds.samples.at(indices[c]);
    for (int j = 0; j <= ds.k; ++j) batch.frames[j].col(c) = sample.frames[j].cast<double>();
    for (int j = 0; j < ds.k; ++j) batch.actions[j].col(c) = sample.actions[j];
  }
  return batch;
}

LossBreakdown<double> update_step(ModelParams<double>& model, const Batch<double>& batch,
                                  const TrainConfig& cfg, OptimizerState& opt, Rng& rng) {
  const NoiseBatch<double> noise =
      draw_noise<double>(rng, model.config.latent_dim, batch.size(), batch.steps());
  ParamGrads<double> grads;
  LossBreakdown<double> breakdown;
  try {
    breakdown = composite_losses_batch<double>(batch, model, cfg.loss_weights(), noise, &grads);
  } catch (const ValidationError& e) {
    // Covariance blow-ups surface as failed factorizations; report them as
    // divergence rather than a caller error.
    throw DivergenceError(std::string("loss evaluation failed: ") + e.what());
  }
  if (!breakdown_finite(breakdown)) throw DivergenceError("non-finite loss");
  if (!all_finite(grads.phi) || !all_finite(grads.psi) || !all_finite(grads.theta))
    throw DivergenceError("non-finite gradient");

  if (cfg.grad_clip > 0) {
    const double norm =
        std::sqrt(grads.phi.squaredNorm() + grads.psi.squaredNorm() + grads.theta.squaredNorm());
    if (norm > cfg.grad_clip) {
      const double scale = cfg.grad_clip / norm;
      grads.phi *= scale;
      grads.psi *= scale;
      grads.theta *= scale;
    }
  }

  if (cfg.optimizer == Optimizer::PlainSgd) {
    model.phi() -= cfg.learning_rate * grads.phi;
    model.psi() -= cfg.learning_rate * grads.psi;
    model.theta() -= cfg.learning_rate * grads.theta;
  } else {
    ++opt.step;
    adam_update(model.phi(), grads.phi, opt.m_phi, opt.v_phi, opt.step, cfg.learning_rate);
    adam_update(model.psi(), grads.psi, opt.m_psi, opt.v_psi, opt.step, cfg.learning_rate);
    adam_update(model.theta(), grads.theta, opt.m_theta, opt.v_theta, opt.step, cfg.learning_rate);
  }
  return breakdown;
}

TrainResult train(const TrainConfig& cfg, const Dataset& dataset,
                  const std::string& checkpoint_stem, const std::string& metrics_path) {
  validate(cfg);
  if (dataset.k != cfg.k)
    throw ValidationError("train: dataset k=" + std::to_string(dataset.k) +
                          " does not match config k=" + std::to_string(cfg.k));
  if (dataset.n < 1 || static_cast<int>(dataset.samples.size()) != dataset.n)
    throw ValidationError("train: dataset is empty or inconsistent");
  if (cfg.lambda2 > 0 && cfg.latent_dim != dataset.action_dim)
    throw ValidationError("train: stability loss requires latent_dim == action_dim");

  ModelConfig mc;
  mc.image_width = dataset.width;
  mc.latent_dim = cfg.latent_dim;
  mc.action_dim = dataset.action_dim;
  mc.hidden_encoder = cfg.hidden_encoder;
  mc.hidden_dynamics = cfg.hidden_dynamics;
  mc.hidden_decoder = cfg.hidden_decoder;
  mc.variant = cfg.variant;
  mc.sigma_w2 = cfg.sigma_w2;

  TrainResult result{init_model<double>(mc, cfg.seed), TrainLog{}};
  OptimizerState opt = OptimizerState::zeros_like(result.model);
  Rng rng(derive_stream(cfg.seed, 1000));

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path, std::ios::binary);
    if (!metrics) throw IoError("train: cannot open metrics log " + metrics_path);
  }

  std::vector<int> order(dataset.n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order.begin(), order.end());

    LossBreakdown<double> epoch_mean;
    epoch_mean.reconstruction_terms = VecX<double>::Zero(cfg.k + 1);
    long seen = 0;
    EpochRecord record;
    record.epoch = epoch;
    try {
      for (int start = 0; start < dataset.n; start += cfg.batch_size) {
        const int stop = std::min(dataset.n, start + cfg.batch_size);
        const std::vector<int> indices(order.begin() + start, order.begin() + stop);
        const Batch<double> batch = make_batch(dataset, indices);
        const LossBreakdown<double> b = update_step(result.model, batch, cfg, opt, rng);
        const double bn = static_cast<double>(indices.size());
        epoch_mean.upper += b.upper * bn;
        epoch_mean.kl_prior += b.kl_prior * bn;
        epoch_mean.consistency += b.consistency * bn;
        epoch_mean.stability += b.stability * bn;
        epoch_mean.composite_phi_psi += b.composite_phi_psi * bn;
        epoch_mean.composite_theta += b.composite_theta * bn;
        epoch_mean.reconstruction_terms += b.reconstruction_terms * bn;
        seen += static_cast<long>(indices.size());
      }
    } catch (const DivergenceError& e) {
      result.log.diverged = true;
      result.log.divergence_message = e.what();
      record.diverged = true;
    }

    if (seen > 0) {
      const double inv = 1.0 / static_cast<double>(seen);
      epoch_mean.upper *= inv;
      epoch_mean.kl_prior *= inv;
      epoch_mean.consistency *= inv;
      epoch_mean.stability *= inv;
      epoch_mean.composite_phi_psi *= inv;
      epoch_mean.composite_theta *= inv;
      epoch_mean.reconstruction_terms *= inv;
    }
    record.losses = epoch_mean;
    record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                         .count();
    result.log.epochs.push_back(record);

    if (metrics.is_open()) {
      json line = breakdown_to_json(record.losses);
      line["epoch"] = record.epoch;
      line["wall_ms"] = record.wall_ms;
      line["diverged"] = record.diverged;
      metrics << line.dump() << "\n";
      metrics.flush();
    }

    if (result.log.diverged) break;

    if (!checkpoint_stem.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      save_checkpoint(result.model, checkpoint_stem + "_epoch" + std::to_string(epoch + 1));
    }
  }

  if (!checkpoint_stem.empty()) save_checkpoint(result.model, checkpoint_stem);
  return result;
}

}  // namespace mse2c
