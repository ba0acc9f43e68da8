#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace mse2c {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// One byte per pixel, values in {0, 1}, row-major pixel order (y * width + x).
using Image = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

template <typename Scalar>
MatX<Scalar> symmetrized(const MatX<Scalar>& m) {
  return ((m + m.transpose()) * Scalar(0.5)).eval();
}

}  // namespace mse2c
