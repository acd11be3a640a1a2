#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"

namespace sheaflab::nn {

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
};

/// Mean softmax cross-entropy over the masked rows of `logits`.
///
/// Rows outside the mask get zero gradient. Each row is shifted by its max
/// before exponentiation.
inline LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                        std::span<const std::size_t> mask) {
  if (mask.empty()) throw EmptyMask("softmax_cross_entropy: empty mask");
  if (labels.size() != static_cast<std::size_t>(logits.rows())) {
    throw ShapeMismatch("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(logits.rows()) + " rows");
  }
  LossResult out{0.0, Matrix::Zero(logits.rows(), logits.cols())};
  const double scale = 1.0 / static_cast<double>(mask.size());
  for (std::size_t node : mask) {
    const auto r = static_cast<Eigen::Index>(node);
    if (r >= logits.rows()) throw ShapeMismatch("softmax_cross_entropy: mask index out of range");
    const int label = labels[node];
    if (label < 0 || label >= logits.cols()) {
      throw ShapeMismatch("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    }
    const auto row = logits.row(r);
    const double shift = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - shift).exp();
    const double z = e.sum();
    out.loss += (std::log(z) - (row(label) - shift)) * scale;
    out.dlogits.row(r) = e / z * scale;
    out.dlogits(r, label) -= scale;
  }
  return out;
}

}  // namespace sheaflab::nn
