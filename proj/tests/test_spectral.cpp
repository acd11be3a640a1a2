#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "invariant_checks.hpp"
#include "oracles.hpp"
#include "sheaflab/spectral.hpp"

namespace sheaflab {
namespace {

BlockSparseMatrix random_symmetric(std::size_t n, rng::Stream& s) {
  const Matrix a = oracle::random_matrix(n, n, s);
  return BlockSparseMatrix::from_dense(BlockPartition::uniform(n, 1), BlockPartition::uniform(n, 1),
                                       a + a.transpose());
}

CellularSheaf signed_sheaf(const Graph& g) {
  std::vector<EdgeRestrictions> maps;
  for (const Edge& e : g.edges()) {
    maps.push_back({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, e.weight > 0 ? 1.0 : -1.0)});
  }
  return CellularSheaf(g, 1, maps);
}

TEST(SymmetricSpectrum, RejectsNonSymmetric) {
  Matrix a = Matrix::Identity(3, 3);
  a(0, 2) = 1.0;
  EXPECT_THROW(symmetric_spectrum(a), EigendecompositionFailure);
  EXPECT_THROW(symmetric_spectrum(Matrix::Ones(2, 3)), ShapeMismatch);
}

TEST(GlobalSections, ConstantSheafConnectedGraph) {
  rng::Stream s(31);
  const Graph g = oracle::random_connected_graph(7, 0.2, s);
  const Matrix h0 = global_sections(constant_sheaf(g, 1));
  ASSERT_EQ(h0.cols(), 1);
  const Vector c = Vector::Constant(7, 1.0 / std::sqrt(7.0));
  EXPECT_NEAR(std::abs(h0.col(0).dot(c)), 1.0, 1e-12);
}

TEST(GlobalSections, NegativeEdge) {
  const Matrix h0 = global_sections(signed_sheaf(Graph(2, {{0, 1, -1.0}})));
  ASSERT_EQ(h0.cols(), 1);
  EXPECT_NEAR(std::abs(h0(0, 0)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(h0(0, 0), -h0(1, 0), 1e-15);
}

TEST(GlobalSections, FrustratedTriangleHasNone) {
  const Graph g(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, -1.0}});
  EXPECT_EQ(global_sections(signed_sheaf(g)).cols(), 0);
  EXPECT_EQ(oracle::nullity(oracle::dense_coboundary(signed_sheaf(g))), 0);
}

TEST(GlobalSections, BalancedTriangleHasOne) {
  const Graph g(3, {{0, 1, -1.0}, {1, 2, 1.0}, {0, 2, -1.0}});
  EXPECT_EQ(global_sections(signed_sheaf(g)).cols(), 1);
}

TEST(GlobalSections, OrthonormalAndAnnihilated) {
  rng::Stream s(32);
  for (int t = 0; t < 10; ++t) {
    const auto sheaf = oracle::gauged_sheaf(oracle::random_connected_graph(8, 0.3, s), 2, 2, s);
    const Matrix h0 = global_sections(sheaf);
    ASSERT_EQ(h0.cols(), 2);
    EXPECT_LE((h0.transpose() * h0 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(coboundary(sheaf).apply(h0).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(sheaf_laplacian(sheaf).apply(h0).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(GlobalSections, DimensionMatchesSvdNullity) {
  rng::Stream s(33);
  for (int t = 0; t < 10; ++t) {
    const auto sheaf = oracle::random_sheaf(oracle::random_connected_graph(6, 0.2, s), 3, 1, 2, s);
    EXPECT_EQ(global_sections(sheaf).cols(), oracle::nullity(oracle::dense_coboundary(sheaf)));
  }
}

TEST(SpectralConvolve, SpectralOnesIsUnit) {
  rng::Stream s(34);
  const auto op = random_symmetric(6, s);
  const auto spec = symmetric_spectrum(op);
  const Cochain0 unit{spec.eigenvectors * Vector::Ones(6)};
  const Cochain0 x{oracle::random_matrix(6, 1, s).col(0)};
  EXPECT_LE((spectral_convolve(op, x, unit).values - x.values).norm(), 1e-12);
}

TEST(SpectralConvolve, ZeroAndCommutative) {
  rng::Stream s(35);
  const auto op = random_symmetric(7, s);
  const Cochain0 x{oracle::random_matrix(7, 1, s).col(0)};
  const Cochain0 y{oracle::random_matrix(7, 1, s).col(0)};
  EXPECT_EQ(spectral_convolve(op, Cochain0{Vector::Zero(7)}, y).values.norm(), 0.0);
  EXPECT_LE((spectral_convolve(op, x, y).values - spectral_convolve(op, y, x).values).norm(), 1e-12);
}

TEST(SpectralConvolve, RejectsNonSymmetricAndWrongLength) {
  Matrix a = Matrix::Identity(3, 3);
  a(1, 0) = 2.0;
  const auto p = BlockPartition::uniform(3, 1);
  const auto op = BlockSparseMatrix::from_dense(p, p, a);
  const Cochain0 x{Vector::Ones(3)};
  EXPECT_THROW(spectral_convolve(op, x, x), EigendecompositionFailure);
  EXPECT_THROW(spectral_convolve(BlockSparseMatrix::identity(p), Cochain0{Vector::Ones(2)}, x), ShapeMismatch);
}

TEST(PolynomialFilter, DegreeZeroAndOne) {
  rng::Stream s(36);
  const auto op = random_symmetric(5, s);
  const std::vector<double> one{1.0}, lin{0.0, 1.0};
  EXPECT_EQ(polynomial_filter(op, one).to_dense(), Matrix(Matrix::Identity(5, 5)));
  EXPECT_EQ(polynomial_filter(op, lin).to_dense(), op.to_dense());
}

TEST(PolynomialFilter, QuadraticMatchesPowers) {
  rng::Stream s(37);
  const auto op = random_symmetric(5, s);
  const Matrix d = op.to_dense();
  const std::vector<double> c{0.5, -2.0, 0.25};
  const Matrix expected = 0.5 * Matrix::Identity(5, 5) - 2.0 * d + 0.25 * d * d;
  EXPECT_LE((polynomial_filter(op, c).to_dense() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PolynomialFilter, FittedPolynomialReproducesConvolution) {
  rng::Stream s(38);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 3 + s.below(6);
    const auto op = checks::random_symmetric_operator(n, 0.05, s);
    const Cochain0 x{oracle::random_matrix(n, 1, s).col(0)};
    const Cochain0 y{oracle::random_matrix(n, 1, s).col(0)};
    const auto coeffs = fit_convolution_polynomial(op, y);
    EXPECT_EQ(coeffs.size(), n);
    const Vector px = polynomial_filter(op, coeffs).apply(x.values);
    EXPECT_LE((px - spectral_convolve(op, x, y).values).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(InvariantSuite, AllChecksPass) {
  for (const auto& r : checks::run_invariant_suite(5)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

}  // namespace
}  // namespace sheaflab
