#include <gtest/gtest.h>

#include <memory>
#include <numeric>
#include <vector>

#include "invariant_checks.hpp"
#include "oracles.hpp"
#include "sheaflab/neural/checkpoint.hpp"
#include "sheaflab/neural/layers.hpp"
#include "sheaflab/neural/model.hpp"
#include "sheaflab/synthgen.hpp"

namespace sheaflab {
namespace {

using nn::Activation;

nn::SharedOperator share(BlockSparseMatrix op) { return std::make_shared<const BlockSparseMatrix>(std::move(op)); }

nn::SharedOperator random_diffusion(std::size_t n, std::size_t k, rng::Stream& s) {
  const auto sheaf = oracle::random_sheaf(oracle::random_connected_graph(n, 0.3, s), k, k, k + 1, s);
  return share(diffusion_normalized(normalized_laplacian(sheaf_laplacian(sheaf), k)));
}

nn::SharedOperator identity_op(std::size_t n, std::size_t k) {
  return share(BlockSparseMatrix::identity(BlockPartition::uniform(n, k)));
}

// ---- activation ----

TEST(Relu, ValuesAndSubgradient) {
  EXPECT_EQ(nn::relu(-1.0), 0.0);
  EXPECT_EQ(nn::relu(2.0), 2.0);
  EXPECT_EQ(nn::relu_grad(0.0), 0.0);
  EXPECT_EQ(nn::relu_grad(3.0), 1.0);
  EXPECT_EQ(nn::parse_activation("relu"), Activation::kRelu);
  EXPECT_THROW(nn::parse_activation("tanh"), ConfigError);
}

TEST(Relu, GradientMatchesFiniteDifferences) {
  rng::Stream s(41);
  Matrix pre = oracle::random_matrix(8, 5, s);
  for (Eigen::Index i = 0; i < pre.size(); ++i)
    if (std::abs(pre.data()[i]) < 1e-6) pre.data()[i] = 0.5;
  const Matrix probe = oracle::random_matrix(8, 5, s);
  auto f = [&]() { return nn::activate(Activation::kRelu, pre).cwiseProduct(probe).sum(); };
  const Matrix analytic = nn::activation_backward(Activation::kRelu, pre, probe);
  EXPECT_LT(oracle::relative_error(analytic, oracle::finite_difference(f, pre)), 1e-6);
}

// ---- sheafconv ----

TEST(SheafConv, AllIdentityLayerIsIdentity) {
  rng::Stream s(42);
  nn::SheafConvLayer layer(identity_op(5, 1), Matrix::Identity(3, 3), Matrix::Ones(1, 1), Activation::kIdentity);
  const Matrix x = oracle::random_matrix(5, 3, s);
  EXPECT_EQ(layer.forward(x), x);
  const Matrix dy = oracle::random_matrix(5, 3, s);
  EXPECT_EQ(layer.backward(dy), dy);
}

TEST(SheafConv, ReducesToDiffusionOnNegativeEdge) {
  const Graph g(2, {{0, 1, -1.0}});
  const auto sheaf = synth::build_signed_sheaf(g);
  const auto h = synth::build_diffusion(sheaf, synth::DegreeMode::kUnweighted);
  nn::SheafConvLayer layer(share(h), Matrix::Identity(2, 2), Matrix::Ones(1, 1), Activation::kIdentity);
  Matrix x(2, 2);
  x << 1.0, 2.0, -3.0, 0.5;
  EXPECT_EQ(layer.forward(x), h.to_dense() * x);
  // I - [[1,1],[1,1]] swaps and negates.
  EXPECT_EQ(layer.forward(x), Matrix(-x.colwise().reverse()));
}

TEST(SheafConv, MatchesLiteralKronecker) {
  rng::Stream s(43);
  for (std::size_t k = 1; k <= 3; ++k) {
    const std::size_t n = 6;
    const auto d = random_diffusion(n, k, s);
    const Matrix a = oracle::random_matrix(4, 3, s);
    const Matrix b = oracle::random_matrix(k, k, s);
    const Matrix x = oracle::random_matrix(n * k, 4, s);
    nn::SheafConvLayer layer(d, a, b, Activation::kRelu);
    const Matrix expected = (d->to_dense() * oracle::kron_identity(n, b) * x * a).cwiseMax(0.0);
    EXPECT_LE(oracle::relative_error(layer.forward(x), expected), 1e-12);
    EXPECT_LE(oracle::relative_error(nn::mix_stalks(b, x), oracle::kron_identity(n, b) * x), 1e-12);
  }
}

TEST(SheafConv, ZeroUpstreamGradient) {
  rng::Stream s(44);
  nn::SheafConvLayer layer(random_diffusion(6, 2, s), oracle::random_matrix(3, 2, s), oracle::random_matrix(2, 2, s),
                           Activation::kRelu);
  layer.zero_grad();
  layer.forward(oracle::random_matrix(12, 3, s));
  const Matrix dx = layer.backward(Matrix::Zero(12, 2));
  EXPECT_TRUE(dx.isZero(0.0));
  EXPECT_TRUE(layer.grad_feature_map().isZero(0.0));
  EXPECT_TRUE(layer.grad_stalk_map().isZero(0.0));
}

TEST(SheafConv, BackwardWithoutForwardThrows) {
  nn::SheafConvLayer layer(identity_op(3, 1), Matrix::Ones(2, 2), Matrix::Ones(1, 1), Activation::kRelu);
  EXPECT_THROW(layer.backward(Matrix::Ones(3, 2)), MissingForwardCache);
}

TEST(SheafConv, ShapeChecks) {
  EXPECT_THROW(nn::SheafConvLayer(identity_op(3, 2), Matrix::Ones(2, 2), Matrix::Ones(4, 4), Activation::kRelu),
               ShapeMismatch);
  nn::SheafConvLayer layer(identity_op(3, 1), Matrix::Ones(2, 2), Matrix::Ones(1, 1), Activation::kRelu);
  EXPECT_THROW(layer.forward(Matrix::Ones(3, 5)), ShapeMismatch);
  EXPECT_THROW(layer.forward(Matrix::Ones(4, 2)), ShapeMismatch);
}

TEST(SheafConv, GradientsMatchFiniteDifferences) {
  rng::Stream s(45);
  for (int t = 0; t < 5; ++t) {
    nn::SheafConvLayer layer(random_diffusion(6, 2, s), oracle::random_matrix(3, 2, s),
                             oracle::random_matrix(2, 2, s), t % 2 ? Activation::kRelu : Activation::kIdentity);
    const Matrix x = oracle::random_matrix(12, 3, s);
    layer.forward(x);
    if (layer.pre_activation().cwiseAbs().minCoeff() < 1e-4) continue;
    EXPECT_LT(checks::layer_gradient_error(layer, x, oracle::random_matrix(12, 2, s)), 1e-5);
  }
}

// ---- gcn ----

TEST(GCN, IdentityLayerIsIdentity) {
  rng::Stream s(46);
  nn::GCNLayer layer(identity_op(4, 1), Matrix::Identity(3, 3), Activation::kIdentity);
  const Matrix x = oracle::random_matrix(4, 3, s);
  EXPECT_EQ(layer.forward(x), x);
}

TEST(GCN, RejectsStalkedOperator) {
  EXPECT_THROW(nn::GCNLayer(identity_op(4, 2), Matrix::Ones(2, 2), Activation::kRelu), ShapeMismatch);
}

TEST(GCN, BitIdenticalToScalarSheafConv) {
  rng::Stream s(47);
  const auto op = random_diffusion(9, 1, s);
  const Matrix w = oracle::random_matrix(4, 3, s);
  nn::GCNLayer gcn(op, w, Activation::kRelu);
  nn::SheafConvLayer sc(op, w, Matrix::Ones(1, 1), Activation::kRelu);
  const Matrix x = oracle::random_matrix(9, 4, s);
  const Matrix dy = oracle::random_matrix(9, 3, s);
  gcn.zero_grad();
  sc.zero_grad();
  EXPECT_LE((gcn.forward(x) - sc.forward(x)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((gcn.backward(dy) - sc.backward(dy)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((gcn.grad_weights() - sc.grad_feature_map()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GCN, GradientsMatchFiniteDifferences) {
  rng::Stream s(48);
  nn::GCNLayer layer(random_diffusion(7, 1, s), oracle::random_matrix(3, 4, s), Activation::kRelu);
  const Matrix x = oracle::random_matrix(7, 3, s);
  layer.forward(x);
  ASSERT_GT(layer.pre_activation().cwiseAbs().minCoeff(), 1e-6);
  EXPECT_LT(checks::layer_gradient_error(layer, x, oracle::random_matrix(7, 4, s)), 1e-5);
}

// ---- combination ----

std::unique_ptr<nn::Layer> linear_sheafconv(const nn::SharedOperator& d, const Matrix& a, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  return std::make_unique<nn::SheafConvLayer>(d, a, Matrix::Identity(kk, kk), Activation::kIdentity);
}

TEST(Combine, SingleBranchSumIsTheBranch) {
  rng::Stream s(49);
  const auto d = random_diffusion(5, 1, s);
  const Matrix a = oracle::random_matrix(3, 2, s);
  std::vector<std::unique_ptr<nn::Layer>> branches;
  branches.push_back(linear_sheafconv(d, a, 1));
  auto combined = nn::combine_operators(std::move(branches), nn::CombineMode::kLearnedSum, Activation::kIdentity);
  auto alone = linear_sheafconv(d, a, 1);
  const Matrix x = oracle::random_matrix(5, 3, s);
  EXPECT_EQ(combined->forward(x), alone->forward(x));
}

TEST(Combine, TwoIdenticalBranchesHalfEach) {
  rng::Stream s(50);
  const auto d = random_diffusion(5, 2, s);
  const Matrix a = oracle::random_matrix(3, 2, s);
  std::vector<std::unique_ptr<nn::Layer>> branches;
  branches.push_back(linear_sheafconv(d, a, 2));
  branches.push_back(linear_sheafconv(d, a, 2));
  auto combined = nn::combine_operators(std::move(branches), nn::CombineMode::kLearnedSum, Activation::kIdentity);
  const Matrix x = oracle::random_matrix(10, 3, s);
  EXPECT_LE((combined->forward(x) - linear_sheafconv(d, a, 2)->forward(x)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Combine, ConcatWidthAndGradients) {
  rng::Stream s(51);
  const auto d1 = random_diffusion(6, 1, s);
  const auto d2 = share(d1->scaled_plus_identity(0.5, 0.25));
  std::vector<std::unique_ptr<nn::Layer>> branches;
  branches.push_back(linear_sheafconv(d1, oracle::random_matrix(2, 4, s), 1));
  branches.push_back(linear_sheafconv(d2, oracle::random_matrix(2, 3, s), 1));
  auto combined = nn::combine_operators(std::move(branches), nn::CombineMode::kConcat, Activation::kRelu);
  EXPECT_EQ(combined->out_features(), 7u);
  const Matrix x = oracle::random_matrix(6, 2, s);
  EXPECT_EQ(combined->forward(x).cols(), 7);
  EXPECT_LT(checks::layer_gradient_error(*combined, x, oracle::random_matrix(6, 7, s)), 1e-5);
}

TEST(Combine, LearnedSumGradientsIncludeCoefficients) {
  rng::Stream s(52);
  const auto d1 = random_diffusion(6, 2, s);
  const auto d2 = share(d1->scaled_plus_identity(-1.0, 1.0));
  std::vector<std::unique_ptr<nn::Layer>> branches;
  branches.push_back(linear_sheafconv(d1, oracle::random_matrix(3, 2, s), 2));
  branches.push_back(linear_sheafconv(d2, oracle::random_matrix(3, 2, s), 2));
  auto combined = nn::combine_operators(std::move(branches), nn::CombineMode::kLearnedSum, Activation::kIdentity);
  bool has_coeffs = false;
  for (const auto& p : combined->parameters()) has_coeffs |= p.name == "coeffs";
  EXPECT_TRUE(has_coeffs);
  EXPECT_LT(checks::layer_gradient_error(*combined, oracle::random_matrix(12, 3, s), oracle::random_matrix(12, 2, s)),
            1e-5);
}

TEST(Combine, RejectsMismatchedBranches) {
  rng::Stream s(53);
  const auto d = random_diffusion(4, 1, s);
  std::vector<std::unique_ptr<nn::Layer>> sum;
  sum.push_back(linear_sheafconv(d, Matrix::Ones(2, 3), 1));
  sum.push_back(linear_sheafconv(d, Matrix::Ones(2, 4), 1));
  EXPECT_THROW(nn::combine_operators(std::move(sum), nn::CombineMode::kLearnedSum, Activation::kIdentity),
               ShapeMismatch);
  std::vector<std::unique_ptr<nn::Layer>> inputs;
  inputs.push_back(linear_sheafconv(d, Matrix::Ones(2, 3), 1));
  inputs.push_back(linear_sheafconv(d, Matrix::Ones(3, 3), 1));
  EXPECT_THROW(nn::combine_operators(std::move(inputs), nn::CombineMode::kConcat, Activation::kIdentity),
               ShapeMismatch);
  EXPECT_THROW(nn::combine_operators({}, nn::CombineMode::kConcat, Activation::kIdentity), ShapeMismatch);
  std::vector<std::unique_ptr<nn::Layer>> nonlinear;
  nonlinear.push_back(std::make_unique<nn::SheafConvLayer>(d, Matrix::Ones(2, 2), Matrix::Ones(1, 1), Activation::kRelu));
  EXPECT_THROW(nn::combine_operators(std::move(nonlinear), nn::CombineMode::kConcat, Activation::kIdentity),
               ConfigError);
}

// ---- model-level properties ----

TEST(Model, PermutationEquivariance) {
  rng::Stream s(54);
  const std::size_t n = 8, k = 2;
  const Graph g = oracle::random_connected_graph(n, 0.3, s);
  const auto sheaf = oracle::random_sheaf(g, k, 1, 2, s);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  s.shuffle(std::span<std::size_t>(perm));
  std::vector<Edge> moved;
  std::vector<EdgeRestrictions> maps;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edge(e);
    moved.push_back({perm[ed.u], perm[ed.v], ed.weight});
    // The graph reorients (v, u) to (u, v); the maps travel with their endpoints.
    if (perm[ed.u] < perm[ed.v]) {
      maps.push_back({Matrix(sheaf.restriction_u(e)), Matrix(sheaf.restriction_v(e))});
    } else {
      maps.push_back({Matrix(sheaf.restriction_v(e)), Matrix(sheaf.restriction_u(e))});
    }
  }
  const CellularSheaf relabeled(Graph(n, moved), k, maps);

  const auto d1 = share(diffusion_normalized(normalized_laplacian(sheaf_laplacian(sheaf), k)));
  const auto d2 = share(diffusion_normalized(normalized_laplacian(sheaf_laplacian(relabeled), k)));
  auto m1 = nn::make_sheaf_model(d1, k, 3, 5, 3, 2, {.seed = 9});
  auto m2 = nn::make_sheaf_model(d2, k, 3, 5, 3, 2, {.seed = 9});

  const Matrix x = oracle::random_matrix(n * k, 3, s);
  Matrix px(x.rows(), x.cols());
  for (std::size_t v = 0; v < n; ++v)
    px.middleRows(static_cast<Eigen::Index>(perm[v] * k), k) = x.middleRows(static_cast<Eigen::Index>(v * k), k);
  const Matrix y1 = m1.forward(x);
  const Matrix y2 = m2.forward(px);
  for (std::size_t v = 0; v < n; ++v) {
    EXPECT_LE((y2.middleRows(static_cast<Eigen::Index>(perm[v] * k), k) -
               y1.middleRows(static_cast<Eigen::Index>(v * k), k))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  rng::Stream s(55);
  const auto d = random_diffusion(6, 2, s);
  const auto p = random_diffusion(12, 1, s);
  auto sheaf_model = nn::make_sheaf_model(d, 2, 3, 4, 3, 2, {.seed = 4});
  auto restored = nn::model_from_json(nn::model_to_json(sheaf_model), d, p);
  const Matrix x = oracle::random_matrix(12, 3, s);
  EXPECT_EQ(restored.forward(x), sheaf_model.forward(x));
  EXPECT_EQ(restored.stalk_dim(), 2u);

  auto gcn_model = nn::make_gcn_model(p, 3, 4, 2, 2, {.seed = 4});
  auto gcn_back = nn::model_from_json(nn::model_to_json(gcn_model), d, p);
  EXPECT_EQ(gcn_back.forward(x), gcn_model.forward(x));
}

TEST(Checkpoint, RejectsUnknownLayerType) {
  const auto doc = nlohmann::json::parse(R"({"k":1,"layers":[{"type":"attention","activation":"relu"}]})");
  EXPECT_THROW(nn::model_from_json(doc, identity_op(2, 1), identity_op(2, 1)), ConfigError);
  EXPECT_THROW(nn::model_from_json(nlohmann::json::parse("{}"), identity_op(2, 1), identity_op(2, 1)), ConfigError);
}

}  // namespace
}  // namespace sheaflab
