#pragma once

#include <utility>
#include <vector>

#include "mse2c/distributions.hpp"
#include "mse2c/models.hpp"
#include "mse2c/planar.hpp"

namespace mse2c {

template <typename Scalar>
struct LossWeights {
  Scalar lambda1 = Scalar(1);    // consistency weight
  Scalar lambda2 = Scalar(0);    // stability weight
  Scalar epsilon = Scalar(0.01); // Gershgorin margin
};

// All terms are per-sample values (batch entries are averaged).
// reconstruction_terms[j] is the negative reconstruction log-likelihood of
// frame j (0 = current frame decoded from z, j >= 1 decoded from the j-step
// predicted latent).
template <typename Scalar>
struct LossBreakdown {
  Scalar upper = Scalar(0);
  VecX<Scalar> reconstruction_terms;
  Scalar kl_prior = Scalar(0);
  Scalar consistency = Scalar(0);
  Scalar stability = Scalar(0);
  Scalar composite_phi_psi = Scalar(0);
  Scalar composite_theta = Scalar(0);
};

// Per-row hinge: max(0, X_ii + sum_{j != i} |X_ij| + eps). Zero loss forces
// every Gershgorin disk into the open left half-plane.
template <typename Scalar>
Scalar gershgorin_loss(const MatX<Scalar>& x, Scalar eps) {
  if (x.rows() != x.cols()) throw ValidationError("gershgorin_loss: matrix must be square");
  Scalar total = Scalar(0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar row = x(i, i) + eps;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (j != i) row += std::abs(x(i, j));
    if (row > Scalar(0)) total += row;
  }
  return total;
}

// Subgradient, zero at the hinge kink and at zero off-diagonal entries.
template <typename Scalar>
MatX<Scalar> gershgorin_grad(const MatX<Scalar>& x, Scalar eps) {
  if (x.rows() != x.cols()) throw ValidationError("gershgorin_grad: matrix must be square");
  MatX<Scalar> g = MatX<Scalar>::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar row = x(i, i) + eps;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (j != i) row += std::abs(x(i, j));
    if (row > Scalar(0)) {
      g(i, i) = Scalar(1);
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j == i) continue;
        if (x(i, j) > Scalar(0)) g(i, j) = Scalar(1);
        else if (x(i, j) < Scalar(0)) g(i, j) = Scalar(-1);
      }
    }
  }
  return g;
}

template <typename Scalar>
Scalar stability_loss(const LocalLinearization<Scalar>& lin, Scalar eps) {
  if (lin.b.rows() != lin.b.cols())
    throw ValidationError("stability_loss: requires square B (latent_dim == action_dim)");
  return gershgorin_loss<Scalar>(lin.a, eps) + gershgorin_loss<Scalar>(lin.b, eps);
}

// Standard-normal draws for one trajectory: xi0 feeds the encoder sample,
// xi[j-1] the sample from the j-step predicted distribution.
template <typename Scalar>
struct TrajectoryNoise {
  VecX<Scalar> xi0;
  std::vector<VecX<Scalar>> xi;
};

// Column-batched trajectories: frames[j] is pixels x n, actions[j] is m x n.
template <typename Scalar>
struct Batch {
  std::vector<MatX<Scalar>> frames;
  std::vector<MatX<Scalar>> actions;

  int size() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cols()); }
  int steps() const { return static_cast<int>(actions.size()); }
};

template <typename Scalar>
struct NoiseBatch {
  MatX<Scalar> xi0;
  std::vector<MatX<Scalar>> xi;
};

template <typename Scalar>
struct ParamGrads {
  VecX<Scalar> phi, psi, theta;
};

template <typename Scalar>
NoiseBatch<Scalar> draw_noise(Rng& rng, int latent_dim, int n, int steps) {
  NoiseBatch<Scalar> noise;
  noise.xi0 = rng.template normal_matrix<Scalar>(latent_dim, n);
  noise.xi.reserve(steps);
  for (int j = 0; j < steps; ++j)
    noise.xi.push_back(rng.template normal_matrix<Scalar>(latent_dim, n));
  return noise;
}

namespace detail {

template <typename Scalar>
void check_batch(const Batch<Scalar>& batch, const ModelParams<Scalar>& model,
                 const NoiseBatch<Scalar>& noise, const LossWeights<Scalar>& w) {
  const int k = batch.steps();
  if (k < 1) throw ValidationError("losses: batch needs at least one step");
  if (static_cast<int>(batch.frames.size()) != k + 1)
    throw ValidationError("losses: frame count must be action count + 1");
  const int n = batch.size();
  if (n < 1) throw ValidationError("losses: empty batch");
  const int pixels = model.config.pixels();
  for (const auto& f : batch.frames)
    if (f.rows() != pixels || f.cols() != n)
      throw ValidationError("losses: frame shape does not match the model");
  for (const auto& a : batch.actions)
    if (a.rows() != model.config.action_dim || a.cols() != n)
      throw ValidationError("losses: action shape does not match the model");
  const int d = model.config.latent_dim;
  if (noise.xi0.rows() != d || noise.xi0.cols() != n ||
      static_cast<int>(noise.xi.size()) != k)
    throw ValidationError("losses: noise shape mismatch");
  for (const auto& x : noise.xi)
    if (x.rows() != d || x.cols() != n) throw ValidationError("losses: noise shape mismatch");
  if (w.lambda1 < Scalar(0) || w.lambda2 < Scalar(0))
    throw ValidationError("losses: lambda weights must be non-negative");
  if (w.lambda2 > Scalar(0)) {
    if (model.config.variant == DynamicsVariant::NonLinear)
      throw ValidationError("losses: stability loss needs a linearized dynamics variant");
    if (model.config.latent_dim != model.config.action_dim)
      throw ValidationError("losses: stability loss requires latent_dim == action_dim");
  }
}

}  // namespace detail

// One forward (and optionally backward) pass over a batch. Gradients of
// upper + lambda1 * consistency + lambda2 * stability are accumulated per
// parameter group and averaged over the batch; the decoder group only ever
// receives the upper-bound part, so its slot simultaneously holds the
// gradient of composite_theta.
template <typename Scalar>
LossBreakdown<Scalar> composite_losses_batch(const Batch<Scalar>& batch,
                                             const ModelParams<Scalar>& model,
                                             const LossWeights<Scalar>& w,
                                             const NoiseBatch<Scalar>& noise,
                                             ParamGrads<Scalar>* grads) {
  detail::check_batch(batch, model, noise, w);
  const int n = batch.size();
  const int k = batch.steps();
  const int d = model.config.latent_dim;
  const int m = model.config.action_dim;
  const bool want_grads = grads != nullptr;
  const bool linearized = model.config.variant != DynamicsVariant::NonLinear;
  const bool global = model.config.variant == DynamicsVariant::GlobalLinear;
  const bool track_stability = linearized && d == m;
  const Scalar inv_n = Scalar(1) / Scalar(n);

  using Mat = MatX<Scalar>;
  using Vec = VecX<Scalar>;
  using Cache = typename Mlp<Scalar>::Cache;

  // --- encoder on the current frame, reparametrized sample ---
  Cache cache_e0;
  const Mat enc0 = model.enc.net.forward(batch.frames[0], want_grads ? &cache_e0 : nullptr);
  const Mat mu0 = enc0.topRows(d);
  const Mat lv0 = enc0.bottomRows(d);
  const Mat var0 = lv0.array().exp().matrix();
  const Mat sig0 = (lv0.array() * Scalar(0.5)).exp().matrix();
  const Mat z = mu0 + sig0.cwiseProduct(noise.xi0);

  // --- latent predictions ---
  Cache cache_dyn;                        // local-linear
  std::vector<Cache> cache_nl(k);         // non-linear, one per step
  std::vector<LocalLinearization<Scalar>> lins;  // per sample (shared entry when global)
  std::vector<Mat> pred_mean(k, Mat(d, n));
  std::vector<std::vector<Mat>> pred_cov(k);   // per step, per sample (linearized path)
  std::vector<std::vector<Mat>> pred_chol(k);
  std::vector<Mat> pred_var(k);                // non-linear path, d x n
  std::vector<Mat> pred_lv(k);                 // non-linear raw log-variances
  std::vector<Mat> zhat(k, Mat(d, n));

  if (linearized) {
    if (global) {
      lins.push_back(detail::unpack_linearization(model.dyn.global_raw, d, m));
    } else {
      const Mat dyn_out = model.dyn.net.forward(z, want_grads ? &cache_dyn : nullptr);
      lins.reserve(n);
      for (int i = 0; i < n; ++i)
        lins.push_back(detail::unpack_linearization(Vec(dyn_out.col(i)), d, m));
    }
    const Mat noise_cov = model.dyn.sigma_w2 * Mat::Identity(d, d);
    for (int j = 0; j < k; ++j) {
      pred_cov[j].resize(n);
      pred_chol[j].resize(n);
    }
    for (int i = 0; i < n; ++i) {
      const auto& lin = lins[global ? 0 : i];
      Gaussian<Scalar> current{Vec(z.col(i)), Mat(var0.col(i).asDiagonal())};
      for (int j = 0; j < k; ++j) {
        current = propagate_linear<Scalar>(current, lin.a,
                                           Vec(lin.b * batch.actions[j].col(i) + lin.o),
                                           noise_cov);
        auto llt = detail::cholesky(current.cov, "composite_losses");
        pred_mean[j].col(i) = current.mean;
        pred_cov[j][i] = current.cov;
        pred_chol[j][i] = Mat(llt.matrixL());
        zhat[j].col(i) = current.mean + pred_chol[j][i] * noise.xi[j].col(i);
      }
    }
  } else {
    Mat prev_mean = z;
    Mat var_acc = Mat::Zero(d, n);
    for (int j = 0; j < k; ++j) {
      Mat in(d + m, n);
      in << prev_mean, batch.actions[j];
      const Mat raw = model.dyn.net.forward(in, want_grads ? &cache_nl[j] : nullptr);
      pred_mean[j] = raw.topRows(d);
      pred_lv[j] = raw.bottomRows(d);
      var_acc += pred_lv[j].array().exp().matrix();
      pred_var[j] = var_acc;
      zhat[j] = pred_mean[j] + pred_var[j].cwiseSqrt().cwiseProduct(noise.xi[j]);
      prev_mean = pred_mean[j];
    }
  }

  // --- decode z and every predicted sample in one batch ---
  Mat dec_in(d, static_cast<Eigen::Index>(n) * (k + 1));
  dec_in.leftCols(n) = z;
  for (int j = 0; j < k; ++j) dec_in.middleCols(static_cast<Eigen::Index>(n) * (j + 1), n) = zhat[j];
  Cache cache_dec;
  const Mat probs = model.dec.net.forward(dec_in, want_grads ? &cache_dec : nullptr);

  LossBreakdown<Scalar> out;
  out.reconstruction_terms = Vec::Zero(k + 1);
  for (int j = 0; j <= k; ++j) {
    Scalar sum = Scalar(0);
    for (int i = 0; i < n; ++i)
      sum -= bernoulli_log_prob<Scalar>(probs.col(static_cast<Eigen::Index>(n) * j + i),
                                        batch.frames[j].col(i));
    out.reconstruction_terms[j] = sum * inv_n;
  }

  out.kl_prior = Scalar(0.5) *
                 (var0.array() + mu0.array().square() - Scalar(1) - lv0.array()).sum() * inv_n;
  out.upper = out.reconstruction_terms.sum() + out.kl_prior;

  // --- encoders on future frames + consistency ---
  std::vector<Cache> cache_enc_future(k);
  std::vector<Mat> enc_future(k);
  Scalar consistency_sum = Scalar(0);
  for (int j = 0; j < k; ++j) {
    enc_future[j] =
        model.enc.net.forward(batch.frames[j + 1], want_grads ? &cache_enc_future[j] : nullptr);
    const auto mu_e = enc_future[j].topRows(d);
    const auto lv_e = enc_future[j].bottomRows(d);
    for (int i = 0; i < n; ++i) {
      const Vec v_e = lv_e.col(i).array().exp().matrix();
      const Vec diff = pred_mean[j].col(i) - mu_e.col(i);
      Scalar trace_term = Scalar(0), log_det_p;
      if (linearized) {
        trace_term = (pred_cov[j][i].diagonal().array() / v_e.array()).sum();
        log_det_p = Scalar(2) * pred_chol[j][i].diagonal().array().log().sum();
      } else {
        trace_term = (pred_var[j].col(i).array() / v_e.array()).sum();
        log_det_p = pred_var[j].col(i).array().log().sum();
      }
      consistency_sum += Scalar(0.5) * (trace_term +
                                        (diff.array().square() / v_e.array()).sum() - Scalar(d) +
                                        lv_e.col(i).sum() - log_det_p);
    }
  }
  out.consistency = consistency_sum * inv_n;

  // --- stability at the linearization points ---
  Scalar stability_sum = Scalar(0);
  if (track_stability) {
    if (global) {
      stability_sum = Scalar(n) * (gershgorin_loss<Scalar>(lins[0].a, w.epsilon) +
                                   gershgorin_loss<Scalar>(lins[0].b, w.epsilon));
    } else {
      for (int i = 0; i < n; ++i)
        stability_sum += gershgorin_loss<Scalar>(lins[i].a, w.epsilon) +
                         gershgorin_loss<Scalar>(lins[i].b, w.epsilon);
    }
  }
  out.stability = stability_sum * inv_n;

  out.composite_phi_psi = out.upper + w.lambda1 * out.consistency + w.lambda2 * out.stability;
  out.composite_theta = out.upper;

  if (!want_grads) return out;

  grads->phi = Vec::Zero(model.phi().size());
  grads->psi = Vec::Zero(model.psi().size());
  grads->theta = Vec::Zero(model.theta().size());

  // --- decoder backward ---
  Mat g_probs(probs.rows(), probs.cols());
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i < n; ++i)
      g_probs.col(static_cast<Eigen::Index>(n) * j + i) =
          -bernoulli_log_prob_grad<Scalar>(probs.col(static_cast<Eigen::Index>(n) * j + i),
                                           batch.frames[j].col(i));
  const Mat g_dec_in = model.dec.net.backward(cache_dec, g_probs, grads->theta);
  Mat z_bar = g_dec_in.leftCols(n);
  std::vector<Mat> zhat_bar(k);
  for (int j = 0; j < k; ++j)
    zhat_bar[j] = g_dec_in.middleCols(static_cast<Eigen::Index>(n) * (j + 1), n);

  // --- consistency backward: encoder side now, prediction side kept for the
  //     recursion reversal below ---
  std::vector<Mat> mean_bar(k, Mat::Zero(d, n));
  std::vector<std::vector<Mat>> cov_bar;       // linearized path
  std::vector<Mat> var_bar_steps;              // non-linear path
  if (linearized) {
    cov_bar.assign(k, std::vector<Mat>());
    for (int j = 0; j < k; ++j) cov_bar[j].assign(n, Mat::Zero(d, d));
  } else {
    var_bar_steps.assign(k, Mat::Zero(d, n));
  }

  for (int j = 0; j < k; ++j) {
    const auto mu_e = enc_future[j].topRows(d);
    const auto lv_e = enc_future[j].bottomRows(d);
    Mat g_enc(2 * d, n);
    for (int i = 0; i < n; ++i) {
      const Vec v_e = lv_e.col(i).array().exp().matrix();
      const Vec diff = pred_mean[j].col(i) - mu_e.col(i);
      mean_bar[j].col(i) += w.lambda1 * (diff.array() / v_e.array()).matrix();
      Vec diag_p(d);
      if (linearized) {
        auto llt = detail::cholesky(pred_cov[j][i], "composite_losses_grad");
        const Mat p_inv = llt.solve(Mat::Identity(d, d));
        cov_bar[j][i] += w.lambda1 * Scalar(0.5) *
                         (Mat(Vec(v_e.cwiseInverse()).asDiagonal()) - p_inv);
        diag_p = pred_cov[j][i].diagonal();
      } else {
        var_bar_steps[j].col(i) +=
            w.lambda1 * Scalar(0.5) *
            (v_e.cwiseInverse() - Vec(pred_var[j].col(i)).cwiseInverse());
        diag_p = pred_var[j].col(i);
      }
      g_enc.col(i).head(d) = -w.lambda1 * (diff.array() / v_e.array()).matrix();
      g_enc.col(i).tail(d) =
          w.lambda1 * Scalar(0.5) *
          (Scalar(1) - (diag_p.array() + diff.array().square()) / v_e.array()).matrix();
    }
    model.enc.net.backward(cache_enc_future[j], g_enc, grads->phi);
  }

  // --- reparametrization of each predicted sample ---
  for (int j = 0; j < k; ++j) {
    mean_bar[j] += zhat_bar[j];
    if (linearized) {
      for (int i = 0; i < n; ++i) {
        const Mat l_bar =
            (Vec(zhat_bar[j].col(i)) * noise.xi[j].col(i).transpose())
                .template triangularView<Eigen::Lower>();
        cov_bar[j][i] += cholesky_backward<Scalar>(pred_chol[j][i], l_bar);
      }
    } else {
      var_bar_steps[j] += Scalar(0.5) * zhat_bar[j].cwiseProduct(noise.xi[j]).cwiseQuotient(
                                             pred_var[j].cwiseSqrt());
    }
  }

  Mat g_mu0 = mu0;                                              // KL-to-prior
  Mat g_lv0 = (Scalar(0.5) * (var0.array() - Scalar(1))).matrix();

  if (linearized) {
    Mat g_dyn_out(d * d + d * m + d, n);
    for (int i = 0; i < n; ++i) {
      const auto& lin = lins[global ? 0 : i];
      Mat a_bar = Mat::Zero(d, d);
      Mat b_bar = Mat::Zero(d, m);
      Vec o_bar = Vec::Zero(d);
      if (track_stability && w.lambda2 != Scalar(0)) {
        a_bar += w.lambda2 * gershgorin_grad<Scalar>(lin.a, w.epsilon);
        b_bar += w.lambda2 * gershgorin_grad<Scalar>(lin.b, w.epsilon);
      }
      Vec m_bar_next = Vec::Zero(d);
      Mat s_bar_next = Mat::Zero(d, d);
      for (int j = k - 1; j >= 0; --j) {
        const Vec mb = mean_bar[j].col(i) + m_bar_next;
        const Mat sb = cov_bar[j][i] + s_bar_next;
        const Vec prev_mean = (j == 0) ? Vec(z.col(i)) : Vec(pred_mean[j - 1].col(i));
        const Mat prev_cov =
            (j == 0) ? Mat(var0.col(i).asDiagonal()) : pred_cov[j - 1][i];
        a_bar += (sb + sb.transpose()) * lin.a * prev_cov;
        a_bar += mb * prev_mean.transpose();
        b_bar += mb * batch.actions[j].col(i).transpose();
        o_bar += mb;
        if (j > 0) {
          m_bar_next = lin.a.transpose() * mb;
          s_bar_next = lin.a.transpose() * sb * lin.a;
        } else {
          z_bar.col(i) += lin.a.transpose() * mb;
          const Mat s0_bar = lin.a.transpose() * sb * lin.a;
          g_lv0.col(i) += var0.col(i).cwiseProduct(s0_bar.diagonal());
        }
      }
      g_dyn_out.col(i).head(d * d) = Eigen::Map<Vec>(a_bar.data(), d * d);
      g_dyn_out.col(i).segment(d * d, d * m) = Eigen::Map<Vec>(b_bar.data(), d * m);
      g_dyn_out.col(i).tail(d) = o_bar;
    }
    if (global) {
      grads->psi += g_dyn_out.rowwise().sum();
    } else {
      z_bar += model.dyn.net.backward(cache_dyn, g_dyn_out, grads->psi);
    }
  } else {
    Mat var_bar_acc = Mat::Zero(d, n);
    Mat mean_bar_next = Mat::Zero(d, n);
    for (int j = k - 1; j >= 0; --j) {
      var_bar_acc += var_bar_steps[j];
      Mat g_raw(2 * d, n);
      g_raw.topRows(d) = mean_bar[j] + mean_bar_next;
      g_raw.bottomRows(d) = pred_lv[j].array().exp().matrix().cwiseProduct(var_bar_acc);
      const Mat g_in = model.dyn.net.backward(cache_nl[j], g_raw, grads->psi);
      mean_bar_next = g_in.topRows(d);
    }
    z_bar += mean_bar_next;
  }

  // --- encoder sample backward ---
  g_mu0 += z_bar;
  g_lv0 += Scalar(0.5) * sig0.cwiseProduct(noise.xi0).cwiseProduct(z_bar);
  Mat g_enc0(2 * d, n);
  g_enc0.topRows(d) = g_mu0;
  g_enc0.bottomRows(d) = g_lv0;
  model.enc.net.backward(cache_e0, g_enc0, grads->phi);

  grads->phi *= inv_n;
  grads->psi *= inv_n;
  grads->theta *= inv_n;
  return out;
}

namespace detail {

template <typename Scalar>
Batch<Scalar> batch_of_one(const TrajectorySample& sample) {
  Batch<Scalar> batch;
  for (const auto& frame : sample.frames)
    batch.frames.push_back(image_to_vector<Scalar>(frame));
  for (const auto& action : sample.actions)
    batch.actions.push_back(action.template cast<Scalar>());
  return batch;
}

template <typename Scalar>
NoiseBatch<Scalar> noise_of_one(const TrajectoryNoise<Scalar>& noise) {
  NoiseBatch<Scalar> out;
  out.xi0 = noise.xi0;
  for (const auto& xi : noise.xi) out.xi.push_back(xi);
  return out;
}

}  // namespace detail

template <typename Scalar>
struct UpperDiagnostics {
  VecX<Scalar> reconstruction_terms;
  Scalar kl_prior = Scalar(0);
};

// Negative reconstruction log-likelihood of every frame plus the KL of the
// encoded current frame against the standard-normal prior, one reparametrized
// sample per distribution. Built from the public single-sample operations so
// it doubles as a readable reference for the batched engine.
template <typename Scalar>
std::pair<Scalar, UpperDiagnostics<Scalar>> upper_bound_loss(const TrajectorySample& sample,
                                                             const ModelParams<Scalar>& model,
                                                             const TrajectoryNoise<Scalar>& noise) {
  const int k = static_cast<int>(sample.actions.size());
  if (static_cast<int>(sample.frames.size()) != k + 1)
    throw ValidationError("upper_bound_loss: frame count must be action count + 1");
  if (static_cast<int>(noise.xi.size()) != k)
    throw ValidationError("upper_bound_loss: noise count mismatch");
  const int d = model.config.latent_dim;

  const VecX<Scalar> x0 = image_to_vector<Scalar>(sample.frames[0]);
  const Gaussian<Scalar> q0 = encode<Scalar>(x0, model.enc);
  const VecX<Scalar> z = reparam_sample<Scalar>(q0, noise.xi0);

  std::vector<VecX<Scalar>> actions;
  for (const auto& a : sample.actions) actions.push_back(a.template cast<Scalar>());
  const auto predicted = predict_sequence<Scalar>(z, q0.cov, actions, model.dyn);

  UpperDiagnostics<Scalar> diag;
  diag.reconstruction_terms = VecX<Scalar>::Zero(k + 1);
  diag.reconstruction_terms[0] =
      -bernoulli_log_prob<Scalar>(decode<Scalar>(z, model.dec), x0);
  for (int j = 0; j < k; ++j) {
    const VecX<Scalar> zhat = reparam_sample<Scalar>(predicted[j], noise.xi[j]);
    diag.reconstruction_terms[j + 1] = -bernoulli_log_prob<Scalar>(
        decode<Scalar>(zhat, model.dec), image_to_vector<Scalar>(sample.frames[j + 1]));
  }

  Gaussian<Scalar> prior{VecX<Scalar>::Zero(d), MatX<Scalar>::Identity(d, d)};
  diag.kl_prior = kl_divergence<Scalar>(q0, prior);
  return {diag.reconstruction_terms.sum() + diag.kl_prior, diag};
}

// Sum over j of KL between the j-step predicted latent distribution and the
// encoding of the observed frame j steps ahead.
template <typename Scalar>
Scalar consistency_loss(const TrajectorySample& sample, const ModelParams<Scalar>& model,
                        const VecX<Scalar>& z_noise) {
  const int k = static_cast<int>(sample.actions.size());
  if (static_cast<int>(sample.frames.size()) != k + 1)
    throw ValidationError("consistency_loss: frame count must be action count + 1");
  const Gaussian<Scalar> q0 = encode<Scalar>(image_to_vector<Scalar>(sample.frames[0]), model.enc);
  const VecX<Scalar> z = reparam_sample<Scalar>(q0, z_noise);
  std::vector<VecX<Scalar>> actions;
  for (const auto& a : sample.actions) actions.push_back(a.template cast<Scalar>());
  const auto predicted = predict_sequence<Scalar>(z, q0.cov, actions, model.dyn);
  Scalar total = Scalar(0);
  for (int j = 0; j < k; ++j) {
    const Gaussian<Scalar> q_future =
        encode<Scalar>(image_to_vector<Scalar>(sample.frames[j + 1]), model.enc);
    total += kl_divergence<Scalar>(predicted[j], q_future);
  }
  return total;
}

template <typename Scalar>
LossBreakdown<Scalar> composite_losses(const TrajectorySample& sample,
                                       const ModelParams<Scalar>& model,
                                       const LossWeights<Scalar>& w,
                                       const TrajectoryNoise<Scalar>& noise) {
  const Batch<Scalar> batch = detail::batch_of_one<Scalar>(sample);
  const NoiseBatch<Scalar> nb = detail::noise_of_one<Scalar>(noise);
  return composite_losses_batch<Scalar>(batch, model, w, nb, nullptr);
}

}  // namespace mse2c
