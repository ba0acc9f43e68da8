#pragma once

#include <cmath>
#include <vector>

#include "mse2c/errors.hpp"
#include "mse2c/rng.hpp"
#include "mse2c/types.hpp"

namespace mse2c {

enum class Activation { Identity, Sigmoid };

// Fully connected net with ReLU hidden layers. Parameters live in one flat
// vector (per layer: W column-major, then b) so optimizers, checkpoints and
// finite-difference checks can treat a network as a plain vector. Inputs are
// column batches: one sample per column.
template <typename Scalar>
class Mlp {
 public:
  struct Cache {
    MatX<Scalar> input;
    std::vector<MatX<Scalar>> acts;  // post-activation per layer
  };

  Mlp() = default;

  Mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Activation output_act)
      : output_act_(output_act) {
    if (in_dim < 1 || out_dim < 1) throw ValidationError("mlp: dimensions must be positive");
    int prev = in_dim;
    Eigen::Index offset = 0;
    for (int h : hidden) {
      if (h < 1) throw ValidationError("mlp: hidden width must be positive");
      layers_.push_back({prev, h, offset, offset + static_cast<Eigen::Index>(prev) * h});
      offset += static_cast<Eigen::Index>(prev) * h + h;
      prev = h;
    }
    layers_.push_back({prev, out_dim, offset, offset + static_cast<Eigen::Index>(prev) * out_dim});
    offset += static_cast<Eigen::Index>(prev) * out_dim + out_dim;
    params_ = VecX<Scalar>::Zero(offset);
  }

  int input_dim() const { return layers_.front().in; }
  int output_dim() const { return layers_.back().out; }
  Eigen::Index param_count() const { return params_.size(); }

  VecX<Scalar>& params() { return params_; }
  const VecX<Scalar>& params() const { return params_; }

  // Fan-in scaled uniform weights, zero biases. Values are rounded through
  // 32-bit floats to match the checkpoint storage precision.
  void init_params(Rng& rng) {
    for (const auto& layer : layers_) {
      const Scalar bound = Scalar(1) / std::sqrt(Scalar(layer.in));
      auto w = weight(layer);
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r)
          w(r, c) = static_cast<Scalar>(static_cast<float>(rng.uniform(-bound, bound)));
      bias(layer).setZero();
    }
  }

  MatX<Scalar> forward(const MatX<Scalar>& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim()) throw ValidationError("mlp: input dimension mismatch");
    if (cache) {
      cache->input = x;
      cache->acts.assign(layers_.size(), MatX<Scalar>());
    }
    MatX<Scalar> a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      MatX<Scalar> z = const_weight(layers_[l]) * a;
      z.colwise() += const_bias(layers_[l]);
      if (l + 1 < layers_.size()) {
        a = z.array().max(Scalar(0)).matrix();  // ReLU
      } else if (output_act_ == Activation::Sigmoid) {
        a = stable_sigmoid(z);
      } else {
        a = std::move(z);
      }
      if (cache) cache->acts[l] = a;
    }
    return a;
  }

  // Accumulates parameter gradients into `grad` (same layout as params) and
  // returns the gradient w.r.t. the input batch.
  MatX<Scalar> backward(const Cache& cache, const MatX<Scalar>& gout, VecX<Scalar>& grad) const {
    if (grad.size() != params_.size()) throw ValidationError("mlp: gradient buffer size mismatch");
    MatX<Scalar> g = gout;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& layer = layers_[li];
      const MatX<Scalar>& act = cache.acts[li];
      if (li + 1 < layers_.size()) {
        g = (g.array() * (act.array() > Scalar(0)).template cast<Scalar>()).matrix();
      } else if (output_act_ == Activation::Sigmoid) {
        g = (g.array() * act.array() * (Scalar(1) - act.array())).matrix();
      }
      const MatX<Scalar>& in = (li == 0) ? cache.input : cache.acts[li - 1];
      grad_weight(layer, grad).noalias() += g * in.transpose();
      grad_bias(layer, grad) += g.rowwise().sum();
      g = const_weight(layer).transpose() * g;
    }
    return g;  // gradient w.r.t. the input batch
  }

 private:
  struct Layer {
    int in, out;
    Eigen::Index w_offset, b_offset;
  };

  static MatX<Scalar> stable_sigmoid(const MatX<Scalar>& z) {
    MatX<Scalar> p(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const Scalar t = z(r, c);
        Scalar v;
        if (t >= Scalar(0)) {
          v = Scalar(1) / (Scalar(1) + std::exp(-t));
        } else {
          const Scalar e = std::exp(t);
          v = e / (Scalar(1) + e);
        }
        // keep the output strictly inside (0, 1)
        const Scalar floor = Scalar(1e-15);
        p(r, c) = std::min(std::max(v, floor), Scalar(1) - floor);
      }
    }
    return p;
  }

  Eigen::Map<MatX<Scalar>> weight(const Layer& l) {
    return {params_.data() + l.w_offset, l.out, l.in};
  }
  Eigen::Map<const MatX<Scalar>> const_weight(const Layer& l) const {
    return {params_.data() + l.w_offset, l.out, l.in};
  }
  Eigen::Map<VecX<Scalar>> bias(const Layer& l) { return {params_.data() + l.b_offset, l.out}; }
  Eigen::Map<const VecX<Scalar>> const_bias(const Layer& l) const {
    return {params_.data() + l.b_offset, l.out};
  }
  static Eigen::Map<MatX<Scalar>> grad_weight(const Layer& l, VecX<Scalar>& g) {
    return {g.data() + l.w_offset, l.out, l.in};
  }
  static Eigen::Map<VecX<Scalar>> grad_bias(const Layer& l, VecX<Scalar>& g) {
    return {g.data() + l.b_offset, l.out};
  }

  std::vector<Layer> layers_;
  Activation output_act_ = Activation::Identity;
  VecX<Scalar> params_;
};

}  // namespace mse2c
