#pragma once

#include <cmath>

#include <Eigen/Cholesky>

#include "mse2c/errors.hpp"
#include "mse2c/types.hpp"

namespace mse2c {

// Mean vector plus full covariance. Diagonal covariances are stored as full
// matrices; callers that know the structure may exploit it, the math here
// does not assume it.
template <typename Scalar>
struct Gaussian {
  VecX<Scalar> mean;
  MatX<Scalar> cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

namespace detail {

template <typename Scalar>
void check_gaussian(const Gaussian<Scalar>& g, const char* who) {
  if (g.cov.rows() != g.cov.cols() || g.cov.rows() != g.mean.size())
    throw ValidationError(std::string(who) + ": mean/cov shape mismatch");
  const Scalar scale = std::max(Scalar(1), g.cov.cwiseAbs().maxCoeff());
  if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * scale)
    throw ValidationError(std::string(who) + ": covariance not symmetric");
}

template <typename Scalar>
Eigen::LLT<MatX<Scalar>> cholesky(const MatX<Scalar>& cov, const char* who) {
  Eigen::LLT<MatX<Scalar>> llt(cov);
  if (llt.info() != Eigen::Success)
    throw ValidationError(std::string(who) + ": covariance not positive definite");
  return llt;
}

template <typename Scalar>
Scalar log_det_from_llt(const Eigen::LLT<MatX<Scalar>>& llt) {
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

// KL(p || q) in nats for Gaussians of equal dimension.
template <typename Scalar>
Scalar kl_divergence(const Gaussian<Scalar>& p, const Gaussian<Scalar>& q) {
  detail::check_gaussian(p, "kl_divergence(p)");
  detail::check_gaussian(q, "kl_divergence(q)");
  if (p.dim() != q.dim()) throw ValidationError("kl_divergence: dimension mismatch");
  const int d = p.dim();
  auto llt_p = detail::cholesky(p.cov, "kl_divergence(p)");
  auto llt_q = detail::cholesky(q.cov, "kl_divergence(q)");
  const MatX<Scalar> qinv_p = llt_q.solve(p.cov);
  const VecX<Scalar> diff = q.mean - p.mean;
  const Scalar maha = diff.dot(llt_q.solve(diff));
  const Scalar log_det_ratio = detail::log_det_from_llt(llt_q) - detail::log_det_from_llt(llt_p);
  return Scalar(0.5) * (qinv_p.trace() + maha - Scalar(d) + log_det_ratio);
}

template <typename Scalar>
struct KlGrads {
  VecX<Scalar> mean_p, mean_q;
  MatX<Scalar> cov_p, cov_q;  // symmetric
};

template <typename Scalar>
KlGrads<Scalar> kl_divergence_grad(const Gaussian<Scalar>& p, const Gaussian<Scalar>& q) {
  if (p.dim() != q.dim()) throw ValidationError("kl_divergence_grad: dimension mismatch");
  const int d = p.dim();
  auto llt_p = detail::cholesky(p.cov, "kl_divergence_grad(p)");
  auto llt_q = detail::cholesky(q.cov, "kl_divergence_grad(q)");
  const MatX<Scalar> p_inv = llt_p.solve(MatX<Scalar>::Identity(d, d));
  const MatX<Scalar> q_inv = llt_q.solve(MatX<Scalar>::Identity(d, d));
  const VecX<Scalar> diff = q.mean - p.mean;
  const VecX<Scalar> q_inv_diff = llt_q.solve(diff);

  KlGrads<Scalar> g;
  g.mean_p = -q_inv_diff;
  g.mean_q = q_inv_diff;
  g.cov_p = symmetrized<Scalar>(Scalar(0.5) * (q_inv - p_inv));
  const MatX<Scalar> inner = p.cov + diff * diff.transpose();
  g.cov_q = symmetrized<Scalar>(Scalar(0.5) * (q_inv - q_inv * inner * q_inv));
  return g;
}

// mean + L xi with L the lower Cholesky factor of cov.
template <typename Scalar>
VecX<Scalar> reparam_sample(const Gaussian<Scalar>& g, const VecX<Scalar>& xi) {
  detail::check_gaussian(g, "reparam_sample");
  if (xi.size() != g.mean.size()) throw ValidationError("reparam_sample: noise dimension mismatch");
  auto llt = detail::cholesky(g.cov, "reparam_sample");
  return g.mean + MatX<Scalar>(llt.matrixL()) * xi;
}

// Adjoint of S -> chol(S). `l_bar` is the gradient w.r.t. the lower factor;
// the returned gradient is symmetric and pairs correctly with any symmetric
// perturbation of S.
template <typename Scalar>
MatX<Scalar> cholesky_backward(const MatX<Scalar>& chol_lower, const MatX<Scalar>& l_bar) {
  MatX<Scalar> phi = chol_lower.transpose() * l_bar;
  phi = phi.template triangularView<Eigen::Lower>();
  phi.diagonal() *= Scalar(0.5);
  const MatX<Scalar> x =
      chol_lower.transpose().template triangularView<Eigen::Upper>().solve(phi);
  const MatX<Scalar> s_bar =
      chol_lower.transpose().template triangularView<Eigen::Upper>().solve(x.transpose()).transpose();
  return symmetrized<Scalar>(s_bar);
}

template <typename Scalar>
struct ReparamGrads {
  VecX<Scalar> mean;
  MatX<Scalar> cov;  // symmetric
};

template <typename Scalar>
ReparamGrads<Scalar> reparam_sample_grad(const Gaussian<Scalar>& g, const VecX<Scalar>& xi,
                                         const VecX<Scalar>& sample_bar) {
  auto llt = detail::cholesky(g.cov, "reparam_sample_grad");
  const MatX<Scalar> chol_lower = llt.matrixL();
  MatX<Scalar> l_bar = (sample_bar * xi.transpose()).template triangularView<Eigen::Lower>();
  return {sample_bar, cholesky_backward<Scalar>(chol_lower, l_bar)};
}

// mean' = A mean + offset, cov' = A cov A^T + noise_cov (re-symmetrized).
template <typename Scalar>
Gaussian<Scalar> propagate_linear(const Gaussian<Scalar>& g, const MatX<Scalar>& a,
                                  const VecX<Scalar>& offset, const MatX<Scalar>& noise_cov) {
  detail::check_gaussian(g, "propagate_linear");
  const int d = g.dim();
  if (a.rows() != d || a.cols() != d || offset.size() != d || noise_cov.rows() != d ||
      noise_cov.cols() != d)
    throw ValidationError("propagate_linear: shape mismatch");
  Gaussian<Scalar> out;
  out.mean = a * g.mean + offset;
  out.cov = symmetrized<Scalar>(a * g.cov * a.transpose() + noise_cov);
  return out;
}

template <typename Scalar>
struct PropagateGrads {
  MatX<Scalar> a;
  VecX<Scalar> mean, offset;
  MatX<Scalar> cov, noise_cov;  // symmetric
};

template <typename Scalar>
PropagateGrads<Scalar> propagate_linear_grad(const Gaussian<Scalar>& g, const MatX<Scalar>& a,
                                             const VecX<Scalar>& mean_out_bar,
                                             const MatX<Scalar>& cov_out_bar) {
  const MatX<Scalar> c_sym = symmetrized<Scalar>(cov_out_bar);
  PropagateGrads<Scalar> grads;
  grads.a = mean_out_bar * g.mean.transpose() + Scalar(2) * c_sym * a * g.cov;
  grads.mean = a.transpose() * mean_out_bar;
  grads.offset = mean_out_bar;
  grads.cov = symmetrized<Scalar>(a.transpose() * c_sym * a);
  grads.noise_cov = c_sym;
  return grads;
}

// Sum of per-pixel Bernoulli log-likelihoods; probabilities are clamped to
// [delta, 1-delta] so saturated predictions stay finite.
template <typename Scalar>
Scalar bernoulli_log_prob(const VecX<Scalar>& probs, const VecX<Scalar>& target,
                          Scalar delta = Scalar(1e-6)) {
  if (probs.size() != target.size()) throw ValidationError("bernoulli_log_prob: length mismatch");
  const auto p = probs.array().max(delta).min(Scalar(1) - delta);
  return (target.array() * p.log() + (Scalar(1) - target.array()) * (Scalar(1) - p).log()).sum();
}

// d/dprobs, zero where the clamp is active.
template <typename Scalar>
VecX<Scalar> bernoulli_log_prob_grad(const VecX<Scalar>& probs, const VecX<Scalar>& target,
                                     Scalar delta = Scalar(1e-6)) {
  if (probs.size() != target.size())
    throw ValidationError("bernoulli_log_prob_grad: length mismatch");
  VecX<Scalar> grad(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const Scalar p = probs[i];
    if (p < delta || p > Scalar(1) - delta) {
      grad[i] = Scalar(0);
    } else {
      grad[i] = target[i] / p - (Scalar(1) - target[i]) / (Scalar(1) - p);
    }
  }
  return grad;
}

// Log density, used by sampling-based checks.
template <typename Scalar>
Scalar gaussian_log_pdf(const Gaussian<Scalar>& g, const VecX<Scalar>& x) {
  auto llt = detail::cholesky(g.cov, "gaussian_log_pdf");
  const VecX<Scalar> diff = x - g.mean;
  const Scalar maha = diff.dot(llt.solve(diff));
  return Scalar(-0.5) * (maha + detail::log_det_from_llt(llt) +
                         Scalar(g.dim()) * std::log(Scalar(2) * Scalar(M_PI)));
}

}  // namespace mse2c
