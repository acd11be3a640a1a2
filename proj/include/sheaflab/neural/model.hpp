#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/neural/adam.hpp"
#include "sheaflab/neural/init.hpp"
#include "sheaflab/neural/layers.hpp"
#include "sheaflab/neural/loss.hpp"
#include "sheaflab/rng.hpp"

namespace sheaflab::nn {

/// Ordered stack of layers. A model with no layers is the identity map.
class Model {
 public:
  Model() = default;
  explicit Model(std::size_t stalk_dim) : stalk_dim_(stalk_dim) {}

  Model& add(std::unique_ptr<Layer> layer) {
    if (!layers_.empty() && layers_.back()->out_features() != layer->in_features()) {
      throw ShapeMismatch("Model: layer " + std::to_string(layers_.size()) + " expects " +
                          std::to_string(layer->in_features()) + " features, previous layer emits " +
                          std::to_string(layers_.back()->out_features()));
    }
    layers_.push_back(std::move(layer));
    return *this;
  }

  Matrix forward(const Matrix& x) {
    Matrix h = x;
    for (auto& layer : layers_) h = layer->forward(h);
    return h;
  }

  /// Backpropagates dL/dlogits and returns dL/dX.
  Matrix backward(const Matrix& dlogits) {
    Matrix g = dlogits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Parameter> parameters() {
    std::vector<Parameter> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (Parameter p : layers_[i]->parameters()) {
        p.name = "layer" + std::to_string(i) + "." + p.name;
        out.push_back(p);
      }
    }
    return out;
  }

  void zero_grad() {
    for (auto& layer : layers_) layer->zero_grad();
  }

  std::size_t num_layers() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  std::size_t stalk_dim() const noexcept { return stalk_dim_; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t stalk_dim_ = 1;
};

/// One full-graph optimization step: forward, masked cross-entropy,
/// backward, Adam update. Returns the loss before the update.
inline double train_step(Model& model, AdamState& adam, const Matrix& x, std::span<const int> labels,
                         std::span<const std::size_t> mask) {
  model.zero_grad();
  const Matrix logits = model.forward(x);
  const LossResult loss = softmax_cross_entropy(logits, labels, mask);
  model.backward(loss.dlogits);
  const auto params = model.parameters();
  adam.step(params);
  return loss.loss;
}

/// Hidden width of every layer but the last, the last emitting `out`.
/// `depth` counts all layers including the output layer.
inline std::vector<std::pair<std::size_t, std::size_t>> layer_widths(std::size_t in, std::size_t hidden,
                                                                     std::size_t depth, std::size_t out) {
  if (depth == 0) throw ConfigError("model depth must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> widths;
  std::size_t prev = in;
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    widths.emplace_back(prev, hidden);
    prev = hidden;
  }
  widths.emplace_back(prev, out);
  return widths;
}

struct InitConfig {
  std::uint64_t seed = 0;
  /// Half-width of the uniform perturbation added to B = I.
  double stalk_noise = 0.01;
};

/// Stack of SheafConv layers with ReLU on all but the last (logit) layer.
inline Model make_sheaf_model(const SharedOperator& diffusion, std::size_t k, std::size_t in,
                              std::size_t hidden, std::size_t depth, std::size_t out,
                              const InitConfig& init = {}) {
  rng::Stream stream(rng::derive(init.seed, "init.sheafconv"));
  Model model(k);
  const auto widths = layer_widths(in, hidden, depth, out);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    Matrix a = init::glorot_uniform(widths[l].first, widths[l].second, stream);
    Matrix b = init::near_identity(k, init.stalk_noise, stream);
    const Activation act = l + 1 == widths.size() ? Activation::kIdentity : Activation::kRelu;
    model.add(std::make_unique<SheafConvLayer>(diffusion, std::move(a), std::move(b), act));
  }
  return model;
}

/// Stack of GCN layers with ReLU on all but the last (logit) layer.
inline Model make_gcn_model(const SharedOperator& propagation, std::size_t in, std::size_t hidden,
                            std::size_t depth, std::size_t out, const InitConfig& init = {}) {
  rng::Stream stream(rng::derive(init.seed, "init.gcn"));
  Model model(1);
  const auto widths = layer_widths(in, hidden, depth, out);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    Matrix w = init::glorot_uniform(widths[l].first, widths[l].second, stream);
    const Activation act = l + 1 == widths.size() ? Activation::kIdentity : Activation::kRelu;
    model.add(std::make_unique<GCNLayer>(propagation, std::move(w), act));
  }
  return model;
}

}  // namespace sheaflab::nn
