#pragma once

#include <cmath>
#include <cstddef>

#include "sheaflab/dense.hpp"
#include "sheaflab/rng.hpp"

namespace sheaflab::nn::init {

/// Entries uniform in (-s, s) with s = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, rng::Stream& stream) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stream.uniform(-s, s);
  return m;
}

/// Identity plus entries uniform in (-scale, scale).
inline Matrix near_identity(std::size_t k, double scale, rng::Stream& stream) {
  const auto n = static_cast<Eigen::Index>(k);
  Matrix m = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += stream.uniform(-scale, scale);
  return m;
}

}  // namespace sheaflab::nn::init
