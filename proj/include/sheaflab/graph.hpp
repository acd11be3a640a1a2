#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sheaflab/errors.hpp"

namespace sheaflab {

/// Undirected edge stored in canonical orientation u -> v with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 1.0;
};

/// Simple undirected graph with optional signed edge weights.
///
/// Edges are kept in insertion order; their index is the edge id used by every
/// operator built on top of the graph. Orientation is a storage convention
/// only: an edge given as (v, u) is stored as (u, v).
class Graph {
 public:
  Graph() = default;

  explicit Graph(std::size_t num_nodes) : num_nodes_(num_nodes) {}

  /// Validates and stores the edge list. Throws InvalidGraph on self-loops,
  /// out-of-range endpoints or duplicate edges.
  Graph(std::size_t num_nodes, std::vector<Edge> edges)
      : num_nodes_(num_nodes), edges_(std::move(edges)) {
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    keys.reserve(edges_.size());
    for (Edge& e : edges_) {
      if (e.u == e.v) throw InvalidGraph("self-loop at node " + std::to_string(e.u));
      if (e.u >= num_nodes_ || e.v >= num_nodes_) {
        throw InvalidGraph("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                           ") out of range for " + std::to_string(num_nodes_) + " nodes");
      }
      if (e.u > e.v) std::swap(e.u, e.v);
      keys.emplace_back(e.u, e.v);
    }
    std::sort(keys.begin(), keys.end());
    const auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) {
      throw InvalidGraph("duplicate edge (" + std::to_string(dup->first) + ", " +
                         std::to_string(dup->second) + ")");
    }
  }

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t id) const { return edges_.at(id); }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(num_nodes_, 0);
    for (const Edge& e : edges_) {
      ++deg[e.u];
      ++deg[e.v];
    }
    return deg;
  }

  std::vector<double> weighted_degrees() const {
    std::vector<double> deg(num_nodes_, 0.0);
    for (const Edge& e : edges_) {
      deg[e.u] += std::abs(e.weight);
      deg[e.v] += std::abs(e.weight);
    }
    return deg;
  }

  std::size_t max_degree() const {
    const auto deg = degrees();
    return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
  }

  std::vector<std::size_t> isolated_nodes() const {
    std::vector<std::size_t> out;
    const auto deg = degrees();
    for (std::size_t i = 0; i < deg.size(); ++i)
      if (deg[i] == 0) out.push_back(i);
    return out;
  }

  /// Adjacency lists (neighbor ids, unsorted).
  std::vector<std::vector<std::size_t>> neighbors() const {
    std::vector<std::vector<std::size_t>> adj(num_nodes_);
    for (const Edge& e : edges_) {
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    return adj;
  }

  std::size_t num_components() const {
    std::vector<std::size_t> parent(num_nodes_);
    for (std::size_t i = 0; i < num_nodes_; ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::size_t count = num_nodes_;
    for (const Edge& e : edges_) {
      const std::size_t a = find(e.u);
      const std::size_t b = find(e.v);
      if (a != b) {
        parent[a] = b;
        --count;
      }
    }
    return count;
  }

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
};

}  // namespace sheaflab
