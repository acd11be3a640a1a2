#pragma once

// Dense spectral routines. Everything here materializes the operator and is
// meant for desk-scale problems (a few thousand rows at most).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sheaflab/block_sparse.hpp"
#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/sheaf.hpp"

namespace sheaflab {

/// Orthonormal eigenbasis of a symmetric operator, eigenvalues ascending.
struct SymmetricSpectrum {
  Vector eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

inline SymmetricSpectrum symmetric_spectrum(const Matrix& dense, double symmetry_tol = 1e-10) {
  if (dense.rows() != dense.cols()) throw ShapeMismatch("spectrum of a non-square operator");
  const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
  if ((dense - dense.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) {
    throw EigendecompositionFailure("operator is not symmetric");
  }
  const Eigen::MatrixXd sym = 0.5 * (dense + dense.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw EigendecompositionFailure("eigensolver did not converge");
  return {eig.eigenvalues(), eig.eigenvectors()};
}

inline SymmetricSpectrum symmetric_spectrum(const BlockSparseMatrix& op, double symmetry_tol = 1e-10) {
  return symmetric_spectrum(op.to_dense(), symmetry_tol);
}

/// Orthonormal basis (as columns) of H^0(G; F) = ker L_F.
///
/// An eigenvalue of L_F counts as zero when it is at most
/// relative_tolerance * lambda_max. A sheaf without edges has every
/// 0-cochain as a section.
inline Matrix global_sections(const CellularSheaf& sheaf, double relative_tolerance = 1e-8) {
  const SymmetricSpectrum spec = symmetric_spectrum(sheaf_laplacian(sheaf));
  const auto n = spec.eigenvalues.size();
  if (n == 0) return Matrix(0, 0);
  const double cutoff = relative_tolerance * std::max(spec.eigenvalues(n - 1), 0.0);
  Eigen::Index nullity = 0;
  while (nullity < n && spec.eigenvalues(nullity) <= cutoff) ++nullity;
  return spec.eigenvectors.leftCols(nullity);
}

/// Convolution x * y = S (S^T x o S^T y) in the orthonormal eigenbasis of
/// the symmetric operator D.
inline Cochain0 spectral_convolve(const BlockSparseMatrix& op, const Cochain0& x, const Cochain0& y) {
  if (static_cast<std::size_t>(x.values.size()) != op.rows() ||
      static_cast<std::size_t>(y.values.size()) != op.rows()) {
    throw ShapeMismatch("spectral_convolve: signal length does not match operator");
  }
  const SymmetricSpectrum spec = symmetric_spectrum(op);
  const Vector xs = spec.eigenvectors.transpose() * x.values;
  const Vector ys = spec.eigenvectors.transpose() * y.values;
  return {spec.eigenvectors * xs.cwiseProduct(ys)};
}

/// Dense Horner evaluation of sum_i coeffs[i] * D^i, returned on the
/// operator's block partition. An empty coefficient list gives zero.
inline BlockSparseMatrix polynomial_filter(const BlockSparseMatrix& op, std::span<const double> coeffs) {
  if (!op.is_square()) throw ShapeMismatch("polynomial_filter requires a square operator");
  const Matrix dense = op.to_dense();
  const auto n = dense.rows();
  Matrix acc = Matrix::Zero(n, n);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    acc = (acc * dense).eval();
    acc.diagonal().array() += *it;
  }
  return BlockSparseMatrix::from_dense(op.row_partition(), op.col_partition(), acc);
}

/// Coefficients a_0..a_{n-1} with sum_i a_i D^i x = x * y for every x.
///
/// Solves the Vandermonde system in the eigenvalues of D against the
/// spectral coefficients of y. Needs pairwise distinct eigenvalues.
inline std::vector<double> fit_convolution_polynomial(const BlockSparseMatrix& op, const Cochain0& y) {
  if (static_cast<std::size_t>(y.values.size()) != op.rows()) {
    throw ShapeMismatch("fit_convolution_polynomial: signal length does not match operator");
  }
  const SymmetricSpectrum spec = symmetric_spectrum(op);
  const Vector ys = spec.eigenvectors.transpose() * y.values;
  const auto n = spec.eigenvalues.size();
  Eigen::MatrixXd vandermonde(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      vandermonde(i, j) = p;
      p *= spec.eigenvalues(i);
    }
  }
  const Vector a = vandermonde.fullPivLu().solve(ys);
  return {a.data(), a.data() + a.size()};
}

}  // namespace sheaflab
