#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sheaflab/block_sparse.hpp"
#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/neural/activation.hpp"

namespace sheaflab::nn {

/// A learnable array together with its gradient slot.
struct Parameter {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

/// Differentiable layer. forward() caches whatever backward() needs;
/// backward() returns dL/dX and accumulates into the parameter gradients.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Matrix forward(const Matrix& x) = 0;
  virtual Matrix backward(const Matrix& dy) = 0;
  virtual std::vector<Parameter> parameters() = 0;

  virtual std::size_t in_features() const = 0;
  virtual std::size_t out_features() const = 0;
  virtual Activation activation() const = 0;

  void zero_grad() {
    for (Parameter& p : parameters()) p.grad->setZero();
  }
};

using SharedOperator = std::shared_ptr<const BlockSparseMatrix>;

/// (I (x) B) X: multiplies B onto every node's k-row block of X.
inline Matrix mix_stalks(const Matrix& b, const Matrix& x) {
  const auto k = b.rows();
  if (k == 1) return b(0, 0) * x;
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); r += k) out.middleRows(r, k).noalias() = b * x.middleRows(r, k);
  return out;
}

/// SheafConv(A, B)(X) = rho(D (I (x) B) X A).
///
/// D is a fixed diffusion operator on C^0 with k-dimensional stalks; A mixes
/// features (N_in x N_out) and B mixes stalk coordinates (k x k). For k = 1
/// B is a redundant scalar but is kept learnable to match the layer formula.
class SheafConvLayer final : public Layer {
 public:
  SheafConvLayer(SharedOperator diffusion, Matrix feature_map, Matrix stalk_map, Activation act)
      : diffusion_(std::move(diffusion)),
        a_(std::move(feature_map)),
        b_(std::move(stalk_map)),
        act_(act),
        grad_a_(Matrix::Zero(a_.rows(), a_.cols())),
        grad_b_(Matrix::Zero(b_.rows(), b_.cols())) {
    if (!diffusion_) throw ShapeMismatch("SheafConvLayer: missing diffusion operator");
    if (b_.rows() == 0 || b_.rows() != b_.cols()) throw ShapeMismatch("SheafConvLayer: B must be square");
    if (!diffusion_->is_square() || diffusion_->rows() % stalk_dim() != 0) {
      throw ShapeMismatch("SheafConvLayer: diffusion operator is not square in stalks of size " +
                          std::to_string(stalk_dim()));
    }
  }

  Matrix forward(const Matrix& x) override {
    if (static_cast<std::size_t>(x.rows()) != diffusion_->cols() ||
        static_cast<std::size_t>(x.cols()) != in_features()) {
      throw ShapeMismatch("SheafConvLayer: input is " + std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + ", expected " +
                          std::to_string(diffusion_->cols()) + "x" + std::to_string(in_features()));
    }
    input_ = x;
    mixed_ = mix_stalks(b_, x);
    pre_ = diffusion_->apply(mixed_ * a_);
    cached_ = true;
    return activate(act_, pre_);
  }

  Matrix backward(const Matrix& dy) override {
    if (!cached_) throw MissingForwardCache("SheafConvLayer::backward called before forward");
    if (dy.rows() != pre_.rows() || dy.cols() != pre_.cols()) {
      throw ShapeMismatch("SheafConvLayer: upstream gradient has wrong shape");
    }
    const Matrix dpre = activation_backward(act_, pre_, dy);
    const Matrix dm = diffusion_->apply_transposed(dpre);
    grad_a_.noalias() += mixed_.transpose() * dm;
    const Matrix dmixed = dm * a_.transpose();
    const auto k = b_.rows();
    for (Eigen::Index r = 0; r < input_.rows(); r += k) {
      grad_b_.noalias() += dmixed.middleRows(r, k) * input_.middleRows(r, k).transpose();
    }
    return mix_stalks(b_.transpose(), dmixed);
  }

  std::vector<Parameter> parameters() override { return {{"A", &a_, &grad_a_}, {"B", &b_, &grad_b_}}; }

  std::size_t in_features() const override { return static_cast<std::size_t>(a_.rows()); }
  std::size_t out_features() const override { return static_cast<std::size_t>(a_.cols()); }
  Activation activation() const override { return act_; }
  std::size_t stalk_dim() const { return static_cast<std::size_t>(b_.rows()); }

  const Matrix& feature_map() const { return a_; }
  const Matrix& stalk_map() const { return b_; }
  const Matrix& grad_feature_map() const { return grad_a_; }
  const Matrix& grad_stalk_map() const { return grad_b_; }
  const SharedOperator& diffusion() const { return diffusion_; }
  /// Pre-activation of the last forward pass.
  const Matrix& pre_activation() const { return pre_; }

 private:
  SharedOperator diffusion_;
  Matrix a_;
  Matrix b_;
  Activation act_;
  Matrix grad_a_;
  Matrix grad_b_;

  bool cached_ = false;
  Matrix input_;
  Matrix mixed_;
  Matrix pre_;
};

/// Kipf-Welling propagation rho(A_hat X W) on a scalar graph signal.
class GCNLayer final : public Layer {
 public:
  GCNLayer(SharedOperator propagation, Matrix weights, Activation act)
      : propagation_(std::move(propagation)),
        w_(std::move(weights)),
        act_(act),
        grad_w_(Matrix::Zero(w_.rows(), w_.cols())) {
    if (!propagation_ || !propagation_->is_square()) {
      throw ShapeMismatch("GCNLayer: propagation operator must be square");
    }
    if (!(propagation_->row_partition() == BlockPartition::uniform(propagation_->rows(), 1))) {
      throw ShapeMismatch("GCNLayer: propagation operator must act on scalar node signals");
    }
  }

  Matrix forward(const Matrix& x) override {
    if (static_cast<std::size_t>(x.rows()) != propagation_->cols() ||
        static_cast<std::size_t>(x.cols()) != in_features()) {
      throw ShapeMismatch("GCNLayer: input is " + std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + ", expected " +
                          std::to_string(propagation_->cols()) + "x" + std::to_string(in_features()));
    }
    input_ = x;
    pre_ = propagation_->apply(x * w_);
    cached_ = true;
    return activate(act_, pre_);
  }

  Matrix backward(const Matrix& dy) override {
    if (!cached_) throw MissingForwardCache("GCNLayer::backward called before forward");
    if (dy.rows() != pre_.rows() || dy.cols() != pre_.cols()) {
      throw ShapeMismatch("GCNLayer: upstream gradient has wrong shape");
    }
    const Matrix dpre = activation_backward(act_, pre_, dy);
    const Matrix dm = propagation_->apply_transposed(dpre);
    grad_w_.noalias() += input_.transpose() * dm;
    return dm * w_.transpose();
  }

  std::vector<Parameter> parameters() override { return {{"W", &w_, &grad_w_}}; }

  std::size_t in_features() const override { return static_cast<std::size_t>(w_.rows()); }
  std::size_t out_features() const override { return static_cast<std::size_t>(w_.cols()); }
  Activation activation() const override { return act_; }

  const Matrix& weights() const { return w_; }
  const Matrix& grad_weights() const { return grad_w_; }
  const SharedOperator& propagation() const { return propagation_; }
  const Matrix& pre_activation() const { return pre_; }

 private:
  SharedOperator propagation_;
  Matrix w_;
  Activation act_;
  Matrix grad_w_;

  bool cached_ = false;
  Matrix input_;
  Matrix pre_;
};

enum class CombineMode { kConcat, kLearnedSum };

/// Parallel branches (each without nonlinearity) joined by column
/// concatenation or by a learnable linear combination sum_i c_i Y_i, followed
/// by one activation.
class CombinedLayer final : public Layer {
 public:
  CombinedLayer(std::vector<std::unique_ptr<Layer>> branches, CombineMode mode, Activation act)
      : branches_(std::move(branches)), mode_(mode), act_(act) {
    if (branches_.empty()) throw ShapeMismatch("CombinedLayer: no branches");
    for (const auto& b : branches_) {
      if (b->activation() != Activation::kIdentity) {
        throw ConfigError("CombinedLayer: branches must not apply a nonlinearity");
      }
      if (b->in_features() != branches_.front()->in_features()) {
        throw ShapeMismatch("CombinedLayer: branches disagree on input width");
      }
      if (mode_ == CombineMode::kLearnedSum && b->out_features() != branches_.front()->out_features()) {
        throw ShapeMismatch("CombinedLayer: learned sum needs identical branch output widths");
      }
    }
    const auto m = static_cast<Eigen::Index>(branches_.size());
    coeffs_ = Matrix::Constant(m, 1, 1.0 / static_cast<double>(m));
    grad_coeffs_ = Matrix::Zero(m, 1);
  }

  Matrix forward(const Matrix& x) override {
    outputs_.clear();
    for (auto& b : branches_) outputs_.push_back(b->forward(x));
    for (const Matrix& y : outputs_) {
      if (y.rows() != outputs_.front().rows()) throw ShapeMismatch("CombinedLayer: branch row counts differ");
    }
    if (mode_ == CombineMode::kConcat) {
      pre_.resize(outputs_.front().rows(), static_cast<Eigen::Index>(out_features()));
      Eigen::Index col = 0;
      for (const Matrix& y : outputs_) {
        pre_.middleCols(col, y.cols()) = y;
        col += y.cols();
      }
    } else {
      pre_ = coeffs_(0, 0) * outputs_.front();
      for (std::size_t i = 1; i < outputs_.size(); ++i) {
        pre_ += coeffs_(static_cast<Eigen::Index>(i), 0) * outputs_[i];
      }
    }
    cached_ = true;
    return activate(act_, pre_);
  }

  Matrix backward(const Matrix& dy) override {
    if (!cached_) throw MissingForwardCache("CombinedLayer::backward called before forward");
    const Matrix dpre = activation_backward(act_, pre_, dy);
    Matrix dx;
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      Matrix branch_dx;
      if (mode_ == CombineMode::kConcat) {
        const Eigen::Index w = outputs_[i].cols();
        branch_dx = branches_[i]->backward(dpre.middleCols(col, w));
        col += w;
      } else {
        const auto idx = static_cast<Eigen::Index>(i);
        grad_coeffs_(idx, 0) += dpre.cwiseProduct(outputs_[i]).sum();
        branch_dx = branches_[i]->backward(coeffs_(idx, 0) * dpre);
      }
      if (i == 0) {
        dx = std::move(branch_dx);
      } else {
        dx += branch_dx;
      }
    }
    return dx;
  }

  std::vector<Parameter> parameters() override {
    std::vector<Parameter> out;
    if (mode_ == CombineMode::kLearnedSum) out.push_back({"coeffs", &coeffs_, &grad_coeffs_});
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      for (Parameter p : branches_[i]->parameters()) {
        p.name = "branch" + std::to_string(i) + "." + p.name;
        out.push_back(p);
      }
    }
    return out;
  }

  std::size_t in_features() const override { return branches_.front()->in_features(); }
  std::size_t out_features() const override {
    if (mode_ == CombineMode::kLearnedSum) return branches_.front()->out_features();
    std::size_t total = 0;
    for (const auto& b : branches_) total += b->out_features();
    return total;
  }
  Activation activation() const override { return act_; }

  CombineMode mode() const { return mode_; }
  Matrix& coefficients() { return coeffs_; }
  const Matrix& coefficients() const { return coeffs_; }
  const Matrix& pre_activation() const { return pre_; }

 private:
  std::vector<std::unique_ptr<Layer>> branches_;
  CombineMode mode_;
  Activation act_;
  Matrix coeffs_;
  Matrix grad_coeffs_;

  bool cached_ = false;
  std::vector<Matrix> outputs_;
  Matrix pre_;
};

/// Joins parallel layers into one; see CombinedLayer.
inline std::unique_ptr<Layer> combine_operators(std::vector<std::unique_ptr<Layer>> branches,
                                                CombineMode mode, Activation act = Activation::kIdentity) {
  return std::make_unique<CombinedLayer>(std::move(branches), mode, act);
}

}  // namespace sheaflab::nn
