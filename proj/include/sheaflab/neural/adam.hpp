#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/neural/layers.hpp"

namespace sheaflab::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are sized on the first step and must
/// keep matching the parameter list afterwards.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  void step(std::span<const Parameter> params) {
    if (first_.empty()) {
      for (const Parameter& p : params) {
        first_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
        second_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      }
    }
    if (params.size() != first_.size()) throw ShapeMismatch("AdamState: parameter count changed");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Parameter& p = params[i];
      if (p.value->rows() != first_[i].rows() || p.value->cols() != first_[i].cols() ||
          p.grad->rows() != p.value->rows() || p.grad->cols() != p.value->cols()) {
        throw ShapeMismatch("AdamState: shape of parameter '" + p.name + "' changed");
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix& g = *params[i].grad;
      first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * g;
      second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
      params[i].value->array() -=
          config_.lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + config_.eps);
    }
  }

  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::size_t t_ = 0;
};

inline void adam_step(AdamState& state, std::span<const Parameter> params) { state.step(params); }

}  // namespace sheaflab::nn
