#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/sheaf.hpp"

namespace sheaflab::io {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Parses a row-major nested array. An empty array yields a 0 x 0 matrix.
inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be a JSON array of rows");
  if (j.empty()) return Matrix(0, 0);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("ragged matrix row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

/// {"num_nodes", "k", "edges": [{"u", "v", "k_e", "F_u", "F_v", "weight"}]}
inline json sheaf_to_json(const CellularSheaf& sheaf) {
  json edges = json::array();
  for (std::size_t e = 0; e < sheaf.num_edges(); ++e) {
    const Edge& edge = sheaf.graph().edge(e);
    edges.push_back({{"u", edge.u},
                     {"v", edge.v},
                     {"k_e", sheaf.edge_dim(e)},
                     {"F_u", matrix_to_json(sheaf.restriction_u(e))},
                     {"F_v", matrix_to_json(sheaf.restriction_v(e))},
                     {"weight", edge.weight}});
  }
  return {{"num_nodes", sheaf.num_nodes()}, {"k", sheaf.vertex_dim()}, {"edges", std::move(edges)}};
}

inline CellularSheaf sheaf_from_json(const json& j) {
  try {
    const auto num_nodes = j.at("num_nodes").get<std::size_t>();
    const auto k = j.at("k").get<std::size_t>();
    std::vector<Edge> edges;
    std::vector<EdgeRestrictions> maps;
    for (const json& e : j.at("edges")) {
      auto u = e.at("u").get<std::size_t>();
      auto v = e.at("v").get<std::size_t>();
      Matrix fu = matrix_from_json(e.at("F_u"));
      Matrix fv = matrix_from_json(e.at("F_v"));
      if (e.contains("k_e") && static_cast<Eigen::Index>(e.at("k_e").get<std::size_t>()) != fu.rows()) {
        throw InvalidSheaf("k_e disagrees with F_u row count");
      }
      // Files may list an edge as v -> u; the graph stores u < v.
      if (u > v) {
        std::swap(u, v);
        std::swap(fu, fv);
      }
      edges.push_back({u, v, e.value("weight", 1.0)});
      maps.push_back({std::move(fu), std::move(fv)});
    }
    return CellularSheaf(Graph(num_nodes, std::move(edges)), k, maps);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed sheaf document: ") + ex.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
}

inline void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(1) << '\n';
}

}  // namespace sheaflab::io
