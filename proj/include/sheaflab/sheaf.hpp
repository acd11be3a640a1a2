#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sheaflab/block_sparse.hpp"
#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/graph.hpp"

namespace sheaflab {

/// The pair of restriction maps attached to one edge e = (u, v), each of
/// shape k_e x k.
struct EdgeRestrictions {
  Matrix from_u;
  Matrix from_v;
};

/// Cellular sheaf on a graph with constant vertex stalk dimension k.
///
/// Restriction maps live in one contiguous array. Edge e = (u, v) stores
/// F_{u<e} followed by F_{v<e}, both row-major k_e x k.
class CellularSheaf {
 public:
  using ConstMap = Eigen::Map<const Matrix>;

  CellularSheaf(Graph graph, std::size_t vertex_dim, std::span<const EdgeRestrictions> maps)
      : graph_(std::move(graph)), k_(vertex_dim) {
    if (k_ == 0) throw InvalidSheaf("vertex stalk dimension must be positive");
    if (maps.size() != graph_.num_edges()) {
      throw InvalidSheaf("expected " + std::to_string(graph_.num_edges()) +
                         " restriction pairs, got " + std::to_string(maps.size()));
    }
    edge_dims_.reserve(maps.size());
    offsets_.reserve(maps.size());
    for (std::size_t e = 0; e < maps.size(); ++e) {
      const Matrix& fu = maps[e].from_u;
      const Matrix& fv = maps[e].from_v;
      if (fu.rows() == 0 || fu.rows() != fv.rows()) {
        throw InvalidSheaf("edge " + std::to_string(e) + ": restriction maps disagree on edge stalk");
      }
      if (static_cast<std::size_t>(fu.cols()) != k_ || static_cast<std::size_t>(fv.cols()) != k_) {
        throw InvalidSheaf("edge " + std::to_string(e) + ": restriction maps must have " +
                           std::to_string(k_) + " columns");
      }
      if (!fu.allFinite() || !fv.allFinite()) {
        throw InvalidSheaf("edge " + std::to_string(e) + ": non-finite restriction entry");
      }
      edge_dims_.push_back(static_cast<std::size_t>(fu.rows()));
      offsets_.push_back(values_.size());
      values_.insert(values_.end(), fu.data(), fu.data() + fu.size());
      values_.insert(values_.end(), fv.data(), fv.data() + fv.size());
    }
  }

  const Graph& graph() const noexcept { return graph_; }
  std::size_t num_nodes() const noexcept { return graph_.num_nodes(); }
  std::size_t num_edges() const noexcept { return graph_.num_edges(); }
  std::size_t vertex_dim() const noexcept { return k_; }
  std::size_t edge_dim(std::size_t e) const { return edge_dims_.at(e); }
  const std::vector<std::size_t>& edge_dims() const noexcept { return edge_dims_; }

  /// dim C^0 = num_nodes * k.
  std::size_t cochain0_dim() const noexcept { return num_nodes() * k_; }

  /// dim C^1 = sum of edge stalk dimensions.
  std::size_t cochain1_dim() const noexcept {
    std::size_t total = 0;
    for (std::size_t d : edge_dims_) total += d;
    return total;
  }

  /// F_{u<e} for the tail endpoint of edge e.
  ConstMap restriction_u(std::size_t e) const {
    return ConstMap(values_.data() + offsets_.at(e), static_cast<Eigen::Index>(edge_dims_[e]),
                    static_cast<Eigen::Index>(k_));
  }

  /// F_{v<e} for the head endpoint of edge e.
  ConstMap restriction_v(std::size_t e) const {
    return ConstMap(values_.data() + offsets_.at(e) + edge_dims_[e] * k_,
                    static_cast<Eigen::Index>(edge_dims_[e]), static_cast<Eigen::Index>(k_));
  }

  BlockPartition node_partition() const { return BlockPartition::uniform(num_nodes(), k_); }
  BlockPartition edge_partition() const { return BlockPartition(edge_dims_); }

 private:
  Graph graph_;
  std::size_t k_;
  std::vector<std::size_t> edge_dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

/// Element of C^0(G; F): one k-vector per node, blocked by node.
struct Cochain0 {
  Vector values;

  static Cochain0 zeros(const CellularSheaf& sheaf) {
    return {Vector::Zero(static_cast<Eigen::Index>(sheaf.cochain0_dim()))};
  }
  bool conforms(const CellularSheaf& sheaf) const {
    return static_cast<std::size_t>(values.size()) == sheaf.cochain0_dim();
  }
};

/// Element of C^1(G; F): one k_e-vector per edge, blocked by edge.
struct Cochain1 {
  Vector values;

  bool conforms(const CellularSheaf& sheaf) const {
    return static_cast<std::size_t>(values.size()) == sheaf.cochain1_dim();
  }
};

/// Sheaf with every stalk R^k and every restriction map the identity.
inline CellularSheaf constant_sheaf(const Graph& graph, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(k);
  std::vector<EdgeRestrictions> maps(graph.num_edges(),
                                     EdgeRestrictions{Matrix::Identity(n, n), Matrix::Identity(n, n)});
  return CellularSheaf(graph, k, maps);
}

/// Coboundary delta: C^0 -> C^1 with (delta x)_e = F_{v<e} x_v - F_{u<e} x_u
/// for e oriented u -> v.
///
/// `reversed`, when non-empty, flips the orientation of the flagged edges
/// (one flag per edge). The Laplacian does not depend on this choice.
inline BlockSparseMatrix coboundary(const CellularSheaf& sheaf, const std::vector<bool>& reversed = {}) {
  if (!reversed.empty() && reversed.size() != sheaf.num_edges()) {
    throw ShapeMismatch("orientation flags must cover every edge");
  }
  BlockSparseMatrix::Builder builder(sheaf.edge_partition(), sheaf.node_partition());
  for (std::size_t e = 0; e < sheaf.num_edges(); ++e) {
    const Edge& edge = sheaf.graph().edge(e);
    const double sign = (!reversed.empty() && reversed[e]) ? -1.0 : 1.0;
    builder.add(e, edge.v, sign * sheaf.restriction_v(e));
    builder.add(e, edge.u, -sign * sheaf.restriction_u(e));
  }
  return std::move(builder).build();
}

inline Cochain1 apply_coboundary(const CellularSheaf& sheaf, const Cochain0& x) {
  if (!x.conforms(sheaf)) throw ShapeMismatch("0-cochain length does not match sheaf");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(sheaf.cochain1_dim()));
  Eigen::Index row = 0;
  const auto k = static_cast<Eigen::Index>(sheaf.vertex_dim());
  for (std::size_t e = 0; e < sheaf.num_edges(); ++e) {
    const Edge& edge = sheaf.graph().edge(e);
    const auto ke = static_cast<Eigen::Index>(sheaf.edge_dim(e));
    out.segment(row, ke) =
        sheaf.restriction_v(e) * x.values.segment(static_cast<Eigen::Index>(edge.v) * k, k) -
        sheaf.restriction_u(e) * x.values.segment(static_cast<Eigen::Index>(edge.u) * k, k);
    row += ke;
  }
  return {std::move(out)};
}

/// Sheaf Laplacian L = delta^T delta on C^0, blocked by node.
inline BlockSparseMatrix sheaf_laplacian(const CellularSheaf& sheaf) {
  return coboundary(sheaf).gram();
}

enum class IsolatedNodePolicy {
  /// Zero diagonal blocks raise SingularBlock.
  kThrow,
  /// Nodes with an all-zero diagonal block are left out of the normalization:
  /// their rows and columns of the normalized Laplacian stay zero.
  kSkip,
};

/// Normalized Laplacian D^{-1/2} L D^{-1/2}, where D is the k x k block
/// diagonal of L. Eigenvalues lie in [0, 2].
inline BlockSparseMatrix normalized_laplacian(const BlockSparseMatrix& laplacian, std::size_t k,
                                              IsolatedNodePolicy policy = IsolatedNodePolicy::kThrow) {
  if (k == 0 || !laplacian.is_square() || laplacian.rows() % k != 0) {
    throw ShapeMismatch("normalized_laplacian: operator is not blocked by stalks of size " +
                        std::to_string(k));
  }
  const std::size_t num_nodes = laplacian.rows() / k;
  const BlockPartition nodes = BlockPartition::uniform(num_nodes, k);
  if (!(laplacian.row_partition() == nodes)) {
    throw ShapeMismatch("normalized_laplacian: operator partition is not uniform in k");
  }
  const auto kk = static_cast<Eigen::Index>(k);

  std::vector<Matrix> inv_sqrt(num_nodes, Matrix::Zero(kk, kk));
  std::vector<bool> skipped(num_nodes, false);
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const auto diag = laplacian.block(v, v);
    if (!diag || diag->isZero(0.0)) {
      if (policy == IsolatedNodePolicy::kSkip) {
        skipped[v] = true;
        continue;
      }
      throw SingularBlock(v, "node " + std::to_string(v) + " has a zero diagonal block");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*diag);
    if (eig.info() != Eigen::Success) {
      throw SingularBlock(v, "eigendecomposition of diagonal block " + std::to_string(v) + " failed");
    }
    const Eigen::VectorXd lambda = eig.eigenvalues();
    if (lambda.minCoeff() <= 1e-12 * std::max(1.0, lambda.maxCoeff())) {
      throw SingularBlock(v, "diagonal block of node " + std::to_string(v) + " is singular");
    }
    inv_sqrt[v] = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
                  eig.eigenvectors().transpose();
  }

  BlockSparseMatrix::Builder builder(nodes, nodes);
  laplacian.for_each_block([&](std::size_t i, std::size_t j, const auto& blk) {
    if (skipped[i] || skipped[j]) return;
    if (k == 1) {
      builder.add_scalar(i, j, inv_sqrt[i](0, 0) * blk(0, 0) * inv_sqrt[j](0, 0));
    } else {
      builder.add(i, j, inv_sqrt[i] * blk * inv_sqrt[j]);
    }
  });
  return std::move(builder).build();
}

/// H^alpha = I - alpha L. Sections of the sheaf are fixed points.
inline BlockSparseMatrix diffusion_alpha(const BlockSparseMatrix& laplacian, double alpha) {
  return laplacian.scaled_plus_identity(-alpha, 1.0);
}

/// H~ = I - L~ for a normalized Laplacian; spectral radius at most 1.
inline BlockSparseMatrix diffusion_normalized(const BlockSparseMatrix& normalized) {
  return normalized.scaled_plus_identity(-1.0, 1.0);
}

}  // namespace sheaflab
