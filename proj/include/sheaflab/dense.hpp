#pragma once

#include <Eigen/Dense>

namespace sheaflab {

// Row-major storage keeps each node's feature row contiguous, which is what
// the block operators stream over.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Node-blocked signal of shape (num_nodes * k) x num_features.
using FeatureMatrix = Matrix;

}  // namespace sheaflab
