#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "sheaflab/errors.hpp"
#include "sheaflab/neural/layers.hpp"
#include "sheaflab/neural/model.hpp"
#include "sheaflab/sheaf_io.hpp"

namespace sheaflab::nn {

// Checkpoint layout:
//   {"k": int, "layers": [{"type": "sheafconv", "A": [[..]], "B": [[..]], "activation": "relu"},
//                         {"type": "gcn", "W": [[..]], "activation": "identity"}, ...]}
// Operators are not stored; the caller supplies them again on load.

inline nlohmann::json model_to_json(const Model& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Layer& layer = model.layer(i);
    if (const auto* sc = dynamic_cast<const SheafConvLayer*>(&layer)) {
      layers.push_back({{"type", "sheafconv"},
                        {"A", io::matrix_to_json(sc->feature_map())},
                        {"B", io::matrix_to_json(sc->stalk_map())},
                        {"activation", to_string(sc->activation())}});
    } else if (const auto* gcn = dynamic_cast<const GCNLayer*>(&layer)) {
      layers.push_back({{"type", "gcn"},
                        {"W", io::matrix_to_json(gcn->weights())},
                        {"activation", to_string(gcn->activation())}});
    } else {
      throw ConfigError("checkpoint: layer " + std::to_string(i) + " has no serialized form");
    }
  }
  return {{"k", model.stalk_dim()}, {"layers", std::move(layers)}};
}

inline Model model_from_json(const nlohmann::json& doc, const SharedOperator& diffusion,
                             const SharedOperator& propagation) {
  try {
    Model model(doc.at("k").get<std::size_t>());
    for (const auto& entry : doc.at("layers")) {
      const auto type = entry.at("type").get<std::string>();
      const Activation act = parse_activation(entry.at("activation").get<std::string>());
      if (type == "sheafconv") {
        model.add(std::make_unique<SheafConvLayer>(diffusion, io::matrix_from_json(entry.at("A")),
                                                   io::matrix_from_json(entry.at("B")), act));
      } else if (type == "gcn") {
        model.add(std::make_unique<GCNLayer>(propagation, io::matrix_from_json(entry.at("W")), act));
      } else {
        throw ConfigError("checkpoint: unknown layer type '" + type + "'");
      }
    }
    return model;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed checkpoint: ") + ex.what());
  }
}

}  // namespace sheaflab::nn
