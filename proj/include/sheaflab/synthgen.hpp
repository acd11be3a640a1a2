#pragma once

// Synthetic semisupervised node classification over signed graphs.
//
// Every node carries a hidden Gaussian vector x_v; its class is the sign of
// <c, x_v> for a Gaussian direction c. Observed features are a noisy random
// linear or two-layer ReLU image of x_v. Edges connect pairs whose noisy
// inner product exceeds a threshold in magnitude and keep its sign, and the
// signed graph becomes a sheaf with scalar stalks whose restriction maps are
// +-sqrt(|w|).
//
// Random streams (all derived from SyntheticConfig::seed, see rng.hpp):
//   "intrinsic"      x_v, row by row
//   "class_vector"   c
//   "projection"     P, or P1 then P2
//   "feature_noise"  epsilon_v, row by row
//   "edge_noise"     counter-based epsilon_uv keyed by (u, v, resample round)
//   "split"          train/test permutation
// Each stage owns its stream, so changing one noise level leaves the other
// draws untouched.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sheaflab/block_sparse.hpp"
#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/rng.hpp"
#include "sheaflab/sheaf.hpp"
#include "sheaflab/sheaf_io.hpp"

namespace sheaflab::synth {

enum class FeatureMode { kLinear, kNonlinear };

inline std::string to_string(FeatureMode mode) {
  return mode == FeatureMode::kLinear ? "linear" : "nonlinear";
}

inline FeatureMode parse_feature_mode(const std::string& name) {
  if (name == "linear") return FeatureMode::kLinear;
  if (name == "nonlinear") return FeatureMode::kNonlinear;
  throw ConfigError("unknown feature mode '" + name + "' (expected linear|nonlinear)");
}

struct SyntheticConfig {
  std::size_t num_nodes = 500;
  std::size_t num_intrinsic = 25;
  std::size_t num_features = 32;
  double tau = 0.5;
  double sigma_feat_sq = 0.0;
  double sigma_w_sq = 0.0;
  FeatureMode feature_mode = FeatureMode::kLinear;
  std::size_t nonlinear_hidden = 32;
  double train_fraction = 0.75;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_nodes < 2) throw ConfigError("num_nodes must be at least 2");
    if (num_intrinsic == 0 || num_features == 0 || nonlinear_hidden == 0) {
      throw ConfigError("dimensions must be positive");
    }
    if (!(tau >= 0.0)) throw ConfigError("tau must be non-negative");
    if (!(sigma_feat_sq >= 0.0) || !(sigma_w_sq >= 0.0)) throw ConfigError("variances must be non-negative");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
  }
};

/// How many times an isolated node's edge-noise row is redrawn before giving up.
inline constexpr std::size_t kIsolatedResampleBudget = 20;

struct Intrinsic {
  Matrix points;        // num_nodes x num_intrinsic
  Vector class_vector;  // num_intrinsic
};

inline Matrix standard_normal(std::size_t rows, std::size_t cols, rng::Stream& stream) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stream.normal();
  return m;
}

inline Intrinsic sample_intrinsic(const SyntheticConfig& config, rng::Stream& points_stream,
                                  rng::Stream& class_stream) {
  Intrinsic out;
  out.points = standard_normal(config.num_nodes, config.num_intrinsic, points_stream);
  out.class_vector = standard_normal(config.num_intrinsic, 1, class_stream).col(0);
  return out;
}

/// Class index per node: 1 when <c, x_v> >= 0 (class +1), else 0 (class -1).
inline std::vector<int> assign_classes(const Matrix& points, const Vector& class_vector) {
  if (points.cols() != class_vector.size()) throw ShapeMismatch("assign_classes: dimension mismatch");
  const Vector scores = points * class_vector;
  std::vector<int> labels(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) labels[static_cast<std::size_t>(i)] = scores(i) >= 0.0 ? 1 : 0;
  return labels;
}

/// X P^T + noise.
inline Matrix linear_map(const Matrix& points, const Matrix& projection, const Matrix& noise) {
  return points * projection.transpose() + noise;
}

/// ReLU(X P1^T + noise) P2^T.
inline Matrix two_layer_map(const Matrix& points, const Matrix& p1, const Matrix& p2, const Matrix& noise) {
  const Matrix hidden = (points * p1.transpose() + noise).cwiseMax(0.0);
  return hidden * p2.transpose();
}

struct Features {
  Matrix values;
  std::vector<Matrix> projections;  // {P} or {P1, P2}
};

inline Features linear_features(const Matrix& points, const SyntheticConfig& config,
                                rng::Stream& projection_stream, rng::Stream& noise_stream) {
  Matrix p = standard_normal(config.num_features, config.num_intrinsic, projection_stream);
  const Matrix noise =
      std::sqrt(config.sigma_feat_sq) * standard_normal(config.num_nodes, config.num_features, noise_stream);
  Features out{linear_map(points, p, noise), {}};
  out.projections.push_back(std::move(p));
  return out;
}

inline Features nonlinear_features(const Matrix& points, const SyntheticConfig& config,
                                   rng::Stream& projection_stream, rng::Stream& noise_stream) {
  Matrix p1 = standard_normal(config.nonlinear_hidden, config.num_intrinsic, projection_stream);
  Matrix p2 = standard_normal(config.num_features, config.nonlinear_hidden, projection_stream);
  const Matrix noise = std::sqrt(config.sigma_feat_sq) *
                       standard_normal(config.num_nodes, config.nonlinear_hidden, noise_stream);
  Features out{two_layer_map(points, p1, p2, noise), {}};
  out.projections.push_back(std::move(p1));
  out.projections.push_back(std::move(p2));
  return out;
}

/// Edge noise epsilon_uv for u < v, a pure function of the key, the pair and
/// how many times each endpoint's row has been redrawn.
inline double edge_noise(std::uint64_t key, std::size_t u, std::size_t v, std::size_t round_u,
                         std::size_t round_v) {
  return rng::normal_at(key, u, v, round_u * (kIsolatedResampleBudget + 1) + round_v);
}

/// Signed graph with w_uv = <x_u, x_v> + sigma_w * eps_uv for every pair with
/// |w_uv| > tau. Isolated nodes get their noise row redrawn up to
/// kIsolatedResampleBudget times; DegenerateGraph if some remain.
inline Graph generate_graph(const Matrix& points, const SyntheticConfig& config, std::uint64_t noise_key) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw DegenerateGraph("need at least two nodes");
  const double sigma = std::sqrt(config.sigma_w_sq);
  std::vector<std::size_t> rounds(n, 0);

  auto build = [&]() {
    std::vector<Edge> edges;
    for (std::size_t u = 0; u + 1 < n; ++u) {
      const auto uu = static_cast<Eigen::Index>(u);
      const Vector dots = points.bottomRows(static_cast<Eigen::Index>(n - u - 1)) * points.row(uu).transpose();
      for (std::size_t v = u + 1; v < n; ++v) {
        double w = dots(static_cast<Eigen::Index>(v - u - 1));
        if (sigma > 0.0) w += sigma * edge_noise(noise_key, u, v, rounds[u], rounds[v]);
        if (std::abs(w) > config.tau) edges.push_back({u, v, w});
      }
    }
    return Graph(n, std::move(edges));
  };

  Graph graph = build();
  for (std::size_t attempt = 0;; ++attempt) {
    const auto isolated = graph.isolated_nodes();
    if (isolated.empty()) return graph;
    // Without edge noise a redraw cannot change anything.
    if (attempt == kIsolatedResampleBudget || sigma == 0.0) {
      throw DegenerateGraph(std::to_string(isolated.size()) + " isolated node(s) remain, first is node " +
                            std::to_string(isolated.front()));
    }
    for (std::size_t v : isolated) ++rounds[v];
    graph = build();
  }
}

/// Scalar-stalk sheaf with restriction maps +-sqrt(|w|); both share a sign on
/// positive edges, and on negative edges the minus sign sits on the
/// higher-index endpoint v.
inline CellularSheaf build_signed_sheaf(const Graph& graph) {
  std::vector<EdgeRestrictions> maps;
  maps.reserve(graph.num_edges());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const double w = graph.edge(e).weight;
    if (w == 0.0) throw ZeroWeightEdge("edge " + std::to_string(e) + " has zero weight");
    const double r = std::sqrt(std::abs(w));
    maps.push_back({Matrix::Constant(1, 1, r), Matrix::Constant(1, 1, w > 0.0 ? r : -r)});
  }
  return CellularSheaf(graph, 1, maps);
}

enum class DegreeMode { kUnweighted, kWeighted };

inline std::string to_string(DegreeMode mode) {
  return mode == DegreeMode::kWeighted ? "weighted" : "unweighted";
}

inline DegreeMode parse_degree_mode(const std::string& name) {
  if (name == "weighted") return DegreeMode::kWeighted;
  if (name == "unweighted") return DegreeMode::kUnweighted;
  throw ConfigError("unknown degree mode '" + name + "' (expected weighted|unweighted)");
}

/// D_F = I - L_F / d_max. Weighted mode takes d_max as the largest sum of |w|
/// at a node, which bounds the spectrum of D_F to [-1, 1]; unweighted mode
/// counts edges and on dense graphs with |w| > 1 gives ||D_F|| well above 1.
inline BlockSparseMatrix build_diffusion(const CellularSheaf& sheaf, DegreeMode mode = DegreeMode::kWeighted) {
  if (sheaf.num_edges() == 0) throw DegenerateGraph("build_diffusion: graph has no edges");
  double d_max = 0.0;
  if (mode == DegreeMode::kUnweighted) {
    d_max = static_cast<double>(sheaf.graph().max_degree());
  } else {
    for (double d : sheaf.graph().weighted_degrees()) d_max = std::max(d_max, d);
  }
  return diffusion_alpha(sheaf_laplacian(sheaf), 1.0 / d_max);
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Uniform permutation; the first round(fraction * n) nodes train. Both index
/// lists are returned sorted.
inline Split split_train_test(std::size_t num_nodes, double train_fraction, rng::Stream& stream) {
  std::vector<std::size_t> perm(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) perm[i] = i;
  stream.shuffle(std::span<std::size_t>(perm));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(num_nodes)));
  Split out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

struct SyntheticDataset {
  SyntheticConfig config;
  Graph graph;
  CellularSheaf sheaf;
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  // Hidden quantities, retained for checks.
  Intrinsic intrinsic;
  std::vector<Matrix> projections;
};

inline SyntheticDataset generate_dataset(const SyntheticConfig& config) {
  config.validate();
  rng::Stream points_stream(rng::derive(config.seed, "intrinsic"));
  rng::Stream class_stream(rng::derive(config.seed, "class_vector"));
  rng::Stream projection_stream(rng::derive(config.seed, "projection"));
  rng::Stream noise_stream(rng::derive(config.seed, "feature_noise"));
  rng::Stream split_stream(rng::derive(config.seed, "split"));

  Intrinsic intrinsic = sample_intrinsic(config, points_stream, class_stream);
  std::vector<int> labels = assign_classes(intrinsic.points, intrinsic.class_vector);
  Features features = config.feature_mode == FeatureMode::kLinear
                          ? linear_features(intrinsic.points, config, projection_stream, noise_stream)
                          : nonlinear_features(intrinsic.points, config, projection_stream, noise_stream);
  Graph graph = generate_graph(intrinsic.points, config, rng::derive(config.seed, "edge_noise"));
  CellularSheaf sheaf = build_signed_sheaf(graph);
  Split split = split_train_test(config.num_nodes, config.train_fraction, split_stream);
  return SyntheticDataset{config,
                          std::move(graph),
                          std::move(sheaf),
                          std::move(features.values),
                          std::move(labels),
                          std::move(split.train),
                          std::move(split.test),
                          std::move(intrinsic),
                          std::move(features.projections)};
}

// -- JSON ------------------------------------------------------------------

inline nlohmann::json config_to_json(const SyntheticConfig& c) {
  return {{"num_nodes", c.num_nodes},
          {"num_intrinsic", c.num_intrinsic},
          {"num_features", c.num_features},
          {"tau", c.tau},
          {"sigma_feat_sq", c.sigma_feat_sq},
          {"sigma_w_sq", c.sigma_w_sq},
          {"feature_mode", to_string(c.feature_mode)},
          {"nonlinear_hidden", c.nonlinear_hidden},
          {"train_fraction", c.train_fraction},
          {"seed", c.seed}};
}

/// Missing keys keep their defaults.
inline SyntheticConfig config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
    c.num_nodes = j.value("num_nodes", c.num_nodes);
    c.num_intrinsic = j.value("num_intrinsic", c.num_intrinsic);
    c.num_features = j.value("num_features", c.num_features);
    c.tau = j.value("tau", c.tau);
    c.sigma_feat_sq = j.value("sigma_feat_sq", c.sigma_feat_sq);
    c.sigma_w_sq = j.value("sigma_w_sq", c.sigma_w_sq);
    c.feature_mode = parse_feature_mode(j.value("feature_mode", to_string(c.feature_mode)));
    c.nonlinear_hidden = j.value("nonlinear_hidden", c.nonlinear_hidden);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed synthetic config: ") + ex.what());
  }
  c.validate();
  return c;
}

/// {"config", "graph": {"num_nodes", "edges": [{"u", "v", "weight"}]},
///  "features", "labels", "train_idx", "test_idx"}
inline nlohmann::json dataset_to_json(const SyntheticDataset& d) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : d.graph.edges()) edges.push_back({{"u", e.u}, {"v", e.v}, {"weight", e.weight}});
  return {{"config", config_to_json(d.config)},
          {"graph", {{"num_nodes", d.graph.num_nodes()}, {"edges", std::move(edges)}}},
          {"features", io::matrix_to_json(d.features)},
          {"labels", d.labels},
          {"train_idx", d.train_idx},
          {"test_idx", d.test_idx}};
}

/// Restores the observable part of a dataset; the sheaf is rebuilt from the
/// edge weights. Hidden quantities are left empty.
inline SyntheticDataset dataset_from_json(const nlohmann::json& j) {
  try {
    SyntheticConfig config = config_from_json(j.at("config"));
    const nlohmann::json& g = j.at("graph");
    std::vector<Edge> edges;
    for (const auto& e : g.at("edges")) {
      edges.push_back({e.at("u").get<std::size_t>(), e.at("v").get<std::size_t>(), e.at("weight").get<double>()});
    }
    Graph graph(g.at("num_nodes").get<std::size_t>(), std::move(edges));
    CellularSheaf sheaf = build_signed_sheaf(graph);
    return SyntheticDataset{config,
                            std::move(graph),
                            std::move(sheaf),
                            io::matrix_from_json(j.at("features")),
                            j.at("labels").get<std::vector<int>>(),
                            j.at("train_idx").get<std::vector<std::size_t>>(),
                            j.at("test_idx").get<std::vector<std::size_t>>(),
                            {},
                            {}};
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed dataset document: ") + ex.what());
  }
}

}  // namespace sheaflab::synth
