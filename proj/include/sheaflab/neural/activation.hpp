#pragma once

#include <string>
#include <string_view>

#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"

namespace sheaflab::nn {

enum class Activation { kIdentity, kRelu };

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

/// Subgradient of relu; 0 at the kink.
inline double relu_grad(double x) noexcept { return x > 0.0 ? 1.0 : 0.0; }

/// Elementwise application. Elementwise ReLU is in particular stalkwise for
/// any stalk dimension.
inline Matrix activate(Activation act, const Matrix& pre) {
  if (act == Activation::kIdentity) return pre;
  return pre.cwiseMax(0.0);
}

/// dY * act'(pre).
inline Matrix activation_backward(Activation act, const Matrix& pre, const Matrix& dy) {
  if (act == Activation::kIdentity) return dy;
  return dy.cwiseProduct(pre.unaryExpr([](double x) { return relu_grad(x); }));
}

inline std::string to_string(Activation act) {
  return act == Activation::kRelu ? "relu" : "identity";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

}  // namespace sheaflab::nn
