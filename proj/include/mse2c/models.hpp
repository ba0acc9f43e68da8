#pragma once

#include <string>
#include <vector>

#include "mse2c/distributions.hpp"
#include "mse2c/errors.hpp"
#include "mse2c/mlp.hpp"

namespace mse2c {

enum class DynamicsVariant { LocalLinear, GlobalLinear, NonLinear };

std::string to_string(DynamicsVariant v);
DynamicsVariant dynamics_variant_from_string(const std::string& s);

template <typename Scalar>
struct LocalLinearization {
  MatX<Scalar> a;  // d x d
  MatX<Scalar> b;  // d x m
  VecX<Scalar> o;  // d

  VecX<Scalar> flatten() const {
    VecX<Scalar> raw(a.size() + b.size() + o.size());
    raw << Eigen::Map<const VecX<Scalar>>(a.data(), a.size()),
        Eigen::Map<const VecX<Scalar>>(b.data(), b.size()), o;
    return raw;
  }
};

namespace detail {

// Raw layout: vec(A) column-major, vec(B) column-major, o.
template <typename Scalar>
LocalLinearization<Scalar> unpack_linearization(const VecX<Scalar>& raw, int d, int m) {
  if (raw.size() != Eigen::Index(d) * d + Eigen::Index(d) * m + d)
    throw ValidationError("unpack_linearization: raw size mismatch");
  LocalLinearization<Scalar> lin;
  lin.a = Eigen::Map<const MatX<Scalar>>(raw.data(), d, d);
  lin.b = Eigen::Map<const MatX<Scalar>>(raw.data() + d * d, d, m);
  lin.o = raw.segment(d * d + d * m, d);
  return lin;
}

}  // namespace detail

struct ModelConfig {
  int image_width = 40;
  int latent_dim = 2;
  int action_dim = 2;
  std::vector<int> hidden_encoder = {150, 150};
  std::vector<int> hidden_dynamics = {100, 100};
  std::vector<int> hidden_decoder = {150, 150};
  DynamicsVariant variant = DynamicsVariant::LocalLinear;
  double sigma_w2 = 0.01;

  int pixels() const { return image_width * image_width; }
};

template <typename Scalar>
struct EncoderParams {
  Mlp<Scalar> net;  // pixels -> [mean; logvar]
  int latent_dim = 0;
};

template <typename Scalar>
struct DynamicsParams {
  DynamicsVariant variant = DynamicsVariant::LocalLinear;
  int latent_dim = 0;
  int action_dim = 0;
  Scalar sigma_w2 = Scalar(0.01);
  Mlp<Scalar> net;            // local-linear: z -> (A,B,o); non-linear: [z;a] -> [mean; logvar]
  VecX<Scalar> global_raw;    // global-linear: free (A,B,o), same layout as the net output

  VecX<Scalar>& raw_params() {
    return variant == DynamicsVariant::GlobalLinear ? global_raw : net.params();
  }
  const VecX<Scalar>& raw_params() const {
    return variant == DynamicsVariant::GlobalLinear ? global_raw : net.params();
  }
};

template <typename Scalar>
struct DecoderParams {
  Mlp<Scalar> net;  // latent -> pixel probabilities
};

template <typename Scalar>
struct ModelParams {
  ModelConfig config;
  EncoderParams<Scalar> enc;
  DynamicsParams<Scalar> dyn;
  DecoderParams<Scalar> dec;

  VecX<Scalar>& phi() { return enc.net.params(); }
  VecX<Scalar>& psi() { return dyn.raw_params(); }
  VecX<Scalar>& theta() { return dec.net.params(); }
  const VecX<Scalar>& phi() const { return enc.net.params(); }
  const VecX<Scalar>& psi() const { return dyn.raw_params(); }
  const VecX<Scalar>& theta() const { return dec.net.params(); }
};

template <typename Scalar>
ModelParams<Scalar> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.latent_dim < 1 || cfg.action_dim < 1 || cfg.image_width < 1)
    throw ValidationError("init_model: bad dimensions");
  if (!(cfg.sigma_w2 > 0)) throw ValidationError("init_model: sigma_w2 must be > 0");
  const int d = cfg.latent_dim;
  const int m = cfg.action_dim;

  ModelParams<Scalar> model;
  model.config = cfg;
  model.enc.latent_dim = d;
  model.enc.net = Mlp<Scalar>(cfg.pixels(), cfg.hidden_encoder, 2 * d, Activation::Identity);
  model.dec.net = Mlp<Scalar>(d, cfg.hidden_decoder, cfg.pixels(), Activation::Sigmoid);

  model.dyn.variant = cfg.variant;
  model.dyn.latent_dim = d;
  model.dyn.action_dim = m;
  model.dyn.sigma_w2 = static_cast<Scalar>(cfg.sigma_w2);
  switch (cfg.variant) {
    case DynamicsVariant::LocalLinear:
      model.dyn.net = Mlp<Scalar>(d, cfg.hidden_dynamics, d * d + d * m + d, Activation::Identity);
      break;
    case DynamicsVariant::NonLinear:
      model.dyn.net = Mlp<Scalar>(d + m, cfg.hidden_dynamics, 2 * d, Activation::Identity);
      break;
    case DynamicsVariant::GlobalLinear:
      model.dyn.global_raw = VecX<Scalar>::Zero(d * d + d * m + d);
      break;
  }

  Rng enc_rng(derive_stream(seed, 0));
  Rng dyn_rng(derive_stream(seed, 1));
  Rng dec_rng(derive_stream(seed, 2));
  model.enc.net.init_params(enc_rng);
  model.dec.net.init_params(dec_rng);
  if (cfg.variant == DynamicsVariant::GlobalLinear) {
    const Scalar bound_a = Scalar(1) / std::sqrt(Scalar(d));
    const Scalar bound_b = Scalar(1) / std::sqrt(Scalar(m));
    for (int i = 0; i < d * d; ++i)
      model.dyn.global_raw[i] =
          static_cast<Scalar>(static_cast<float>(dyn_rng.uniform(-bound_a, bound_a)));
    for (int i = 0; i < d * m; ++i)
      model.dyn.global_raw[d * d + i] =
          static_cast<Scalar>(static_cast<float>(dyn_rng.uniform(-bound_b, bound_b)));
    // start at an identity transition so early predictions track the encoder
    for (int i = 0; i < d; ++i)
      model.dyn.global_raw[i * d + i] = static_cast<Scalar>(
          static_cast<float>(model.dyn.global_raw[i * d + i] + Scalar(1)));
  } else {
    model.dyn.net.init_params(dyn_rng);
    if (cfg.variant == DynamicsVariant::LocalLinear) {
      // bias the A block toward the identity, same rationale as above
      auto bias = model.dyn.net.params().tail(d * d + d * m + d);
      for (int i = 0; i < d; ++i)
        bias[i * d + i] = static_cast<Scalar>(static_cast<float>(bias[i * d + i] + Scalar(1)));
    }
  }
  return model;
}

// Diagonal-covariance Gaussian over the latent space.
template <typename Scalar>
Gaussian<Scalar> encode(const VecX<Scalar>& image, const EncoderParams<Scalar>& enc) {
  if (image.size() != enc.net.input_dim()) throw ValidationError("encode: image length mismatch");
  const VecX<Scalar> out = enc.net.forward(image);
  const int d = enc.latent_dim;
  Gaussian<Scalar> g;
  g.mean = out.head(d);
  g.cov = out.tail(d).array().exp().matrix().asDiagonal();
  return g;
}

template <typename Scalar>
VecX<Scalar> image_to_vector(const Image& img) {
  return img.cast<Scalar>();
}

template <typename Scalar>
LocalLinearization<Scalar> linearize(const VecX<Scalar>& z, const DynamicsParams<Scalar>& dyn) {
  const int d = dyn.latent_dim;
  const int m = dyn.action_dim;
  switch (dyn.variant) {
    case DynamicsVariant::LocalLinear: {
      if (z.size() != d) throw ValidationError("linearize: latent dimension mismatch");
      return detail::unpack_linearization(VecX<Scalar>(dyn.net.forward(z)), d, m);
    }
    case DynamicsVariant::GlobalLinear:
      return detail::unpack_linearization(dyn.global_raw, d, m);
    case DynamicsVariant::NonLinear:
      throw ValidationError("linearize: non-linear dynamics have no linearization");
  }
  throw ValidationError("linearize: unknown variant");
}

// Distributions over the next K latents. Linear variants linearize once at
// z_sample and propagate mean and covariance exactly; the non-linear variant
// chains the network on previous means and accumulates predicted variances.
template <typename Scalar>
std::vector<Gaussian<Scalar>> predict_sequence(const VecX<Scalar>& z_sample,
                                               const MatX<Scalar>& enc_cov,
                                               const std::vector<VecX<Scalar>>& actions,
                                               const DynamicsParams<Scalar>& dyn) {
  const int d = dyn.latent_dim;
  if (actions.empty()) throw ValidationError("predict_sequence: needs at least one action");
  for (const auto& a : actions)
    if (a.size() != dyn.action_dim) throw ValidationError("predict_sequence: action dim mismatch");
  if (z_sample.size() != d) throw ValidationError("predict_sequence: latent dim mismatch");

  std::vector<Gaussian<Scalar>> out;
  out.reserve(actions.size());
  if (dyn.variant == DynamicsVariant::NonLinear) {
    VecX<Scalar> mean = z_sample;
    VecX<Scalar> var = VecX<Scalar>::Zero(d);
    for (const auto& action : actions) {
      VecX<Scalar> in(d + dyn.action_dim);
      in << mean, action;
      const VecX<Scalar> raw = dyn.net.forward(in);
      mean = raw.head(d);
      var += raw.tail(d).array().exp().matrix();
      out.push_back({mean, MatX<Scalar>(var.asDiagonal())});
    }
    return out;
  }

  const LocalLinearization<Scalar> lin = linearize(z_sample, dyn);
  const MatX<Scalar> noise = dyn.sigma_w2 * MatX<Scalar>::Identity(d, d);
  Gaussian<Scalar> current{z_sample, enc_cov};
  for (const auto& action : actions) {
    current = propagate_linear<Scalar>(current, lin.a, lin.b * action + lin.o, noise);
    out.push_back(current);
  }
  return out;
}

// Pixel probabilities, strictly inside (0, 1).
template <typename Scalar>
VecX<Scalar> decode(const VecX<Scalar>& z, const DecoderParams<Scalar>& dec) {
  if (z.size() != dec.net.input_dim()) throw ValidationError("decode: latent dimension mismatch");
  return dec.net.forward(z);
}

}  // namespace mse2c
