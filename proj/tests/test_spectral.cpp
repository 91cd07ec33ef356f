#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "selfment/affinity.hpp"
#include "selfment/errors.hpp"
#include "selfment/spectral.hpp"
#include "selfment/synthetic.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace selfment;
using testutil::field_from_rows;
using testutil::mask_of;

namespace {

AffinityGraph graph_from_weights(const Eigen::MatrixXd& w) {
  AffinityGraph g;
  g.weights = w;
  g.degree = w.rowwise().sum();
  return g;
}

FeatureField random_unit_field(std::uint32_t h, std::uint32_t w, std::uint32_t dim, std::mt19937& gen) {
  std::normal_distribution<float> normal;
  std::vector<std::vector<float>> rows(h * w, std::vector<float>(dim));
  for (auto& r : rows) {
    for (auto& v : r) v = normal(gen);
  }
  return normalize_features(field_from_rows(h, w, rows));
}

/// L_sym written out from the raw features, without the library's affinity code.
std::vector<std::vector<double>> lsym_from_features(const FeatureField& f, double tau, double eps) {
  const std::size_t n = f.patch_count();
  std::vector<std::vector<double>> a(n, std::vector<double>(n));
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::uint32_t k = 0; k < f.dim; ++k) dot += static_cast<double>(f.data[i * f.dim + k]) * f.data[j * f.dim + k];
      a[i][j] = dot > tau ? dot : eps;
      deg[i] += a[i][j];
    }
  std::vector<std::vector<double>> l(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      l[i][j] = ((i == j ? deg[i] : 0.0) - a[i][j]) / std::sqrt(deg[i] * deg[j]);
  return l;
}

double iou(const PatchMask& a, const PatchMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.labels[i] && b.labels[i];
    uni += a.labels[i] || b.labels[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST(Fiedler, TwoNodeGraphMatchesClosedForm) {
  for (double w : {1e-5, 0.1, 0.3, 0.5, 0.9}) {
    Eigen::MatrixXd m(2, 2);
    m << 1, w, w, 1;
    const auto r = fiedler_vector(graph_from_weights(m));
    // (D - A) x = lambda D x with D = (1 + w) I and x = (1, -1).
    EXPECT_NEAR(r.eigenvalue, 2 * w / (1 + w), 1e-10) << w;
    EXPECT_NEAR(std::abs(r.vector(0)), std::sqrt(0.5), 1e-8);
    EXPECT_NEAR(r.vector(0), -r.vector(1), 1e-8);
  }
}

TEST(Fiedler, TwoCliquesAreSeparatedBySign) {
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 10; ++i) rows.push_back(i < 5 ? std::vector<float>{1, 0} : std::vector<float>{0, 1});
  const auto field = field_from_rows(1, 10, rows);
  const auto graph = build_affinity(field);
  const auto r = fiedler_vector(graph);
  const auto dense = dense_eig_oracle(graph);
  EXPECT_NEAR(r.eigenvalue, dense.eigenvalues(1), 1e-8);
  for (int i = 1; i < 10; ++i) EXPECT_EQ(r.vector(i) > 0, (r.vector(0) > 0) == (i < 5)) << i;
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r.vector(i) > 0, dense.vectors(i, 1) * dense.vectors(0, 1) * r.vector(0) > 0);
}

TEST(Fiedler, IdenticalRowsAgreeWithOracleOrReportNonConvergence) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Constant(12, 12, 0.7);
  const auto graph = graph_from_weights(m);
  const auto dense = dense_eig_oracle(graph);
  try {
    const auto r = fiedler_vector(graph);
    EXPECT_NEAR(r.eigenvalue, dense.eigenvalues(1), 1e-6);
    EXPECT_NEAR(r.eigenvalue, 1.0, 1e-6);
    EXPECT_LE(r.residual, 1e-6);
  } catch (const ConvergenceError&) {
    SUCCEED();
  }
}

TEST(Fiedler, RandomGraphsAgreeWithDenseOracleAndIndependentEigenvalues) {
  std::mt19937 gen(77);
  for (int t = 0; t < 10; ++t) {
    const auto field = random_unit_field(5, 10, 3 + t % 4, gen);
    const auto graph = build_affinity(field);
    const auto r = fiedler_vector(graph);
    const auto dense = dense_eig_oracle(graph);
    EXPECT_NEAR(r.eigenvalue, dense.eigenvalues(1), 1e-6);
    EXPECT_NEAR(r.eigenvalue, oracle::symmetric_eigenvalue(lsym_from_features(field, 0.2, 1e-5), 1), 1e-6);
    const Eigen::VectorXd xo = dense.vectors.col(1).normalized();
    EXPECT_GE(std::abs(xo.dot(r.vector.normalized())), 1 - 1e-8);

    // Converged solves satisfy the residual rule and are D-orthogonal to 1.
    const Eigen::VectorXd dx = graph.degree.cwiseProduct(r.vector);
    const Eigen::VectorXd lx = dx - graph.weights * r.vector;
    EXPECT_LE((lx - r.eigenvalue * dx).norm(), 1e-6 * dx.norm());
    EXPECT_LE(std::abs(r.vector.dot(graph.degree)), 1e-5 * r.vector.norm() * graph.degree.norm());
  }
}

TEST(Fiedler, DegenerateAndNonConvergentInputs) {
  EXPECT_THROW(fiedler_vector(graph_from_weights(Eigen::MatrixXd::Ones(1, 1))), DegenerateInputError);
  std::mt19937 gen(5);
  const auto graph = build_affinity(random_unit_field(10, 12, 8, gen));
  try {
    fiedler_vector(graph, 1e-12, 3);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_residual(), 0.0);
  }
}

TEST(DenseOracle, LaplacianPropertiesAndReconstruction) {
  std::mt19937 gen(9);
  for (int t = 0; t < 5; ++t) {
    const auto graph = build_affinity(random_unit_field(6, 6, 5, gen));
    const auto s = dense_eig_oracle(graph);
    EXPECT_GE(s.eigenvalues.minCoeff(), -1e-8);
    EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-8);
    for (Eigen::Index i = 1; i < s.eigenvalues.size(); ++i) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
    const Eigen::MatrixXd rebuilt = s.orthonormal * s.eigenvalues.asDiagonal() * s.orthonormal.transpose();
    EXPECT_LE((s.l_sym - rebuilt).norm(), 1e-8 * s.l_sym.norm());
  }
}

TEST(DenseOracle, RejectsLargeGraphs) {
  AffinityGraph g = graph_from_weights(Eigen::MatrixXd::Ones(kDenseOracleMaxNodes + 1, kDenseOracleMaxNodes + 1));
  EXPECT_THROW(dense_eig_oracle(g), ValidationError);
}

TEST(ThresholdAtMean, Examples) {
  Eigen::VectorXd a(3);
  a << 1, 2, 3;
  EXPECT_EQ(threshold_at_mean(a, 1, 3).labels, testutil::labels_of({0, 0, 1}));
  EXPECT_EQ(threshold_at_mean(Eigen::VectorXd::Constant(4, 0.3), 2, 2).count_foreground(), 0u);
  Eigen::VectorXd b(2);
  b << -1, 1;
  EXPECT_EQ(threshold_at_mean(b, 1, 2).labels, testutil::labels_of({0, 1}));
}

TEST(ThresholdAtMean, NegationGivesComplement) {
  std::mt19937 gen(1);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd x(24);
    for (auto& v : x) v = normal(gen);
    const auto m = threshold_at_mean(x, 4, 6);
    const auto n = threshold_at_mean(-x, 4, 6);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NE(m.labels[i], n.labels[i]);
  }
}

TEST(ResolveAndComponent, SeedOnZeroSideInvertsTheMask) {
  Eigen::VectorXd x(3);
  x << 0.1, -0.9, 0.5;
  const auto b = resolve_and_component(x, mask_of(1, 3, {1, 0, 1}));
  EXPECT_EQ(b.seed, 1u);
  EXPECT_TRUE(b.inverted);
  EXPECT_EQ(b.mask.labels, testutil::labels_of({0, 1, 0}));
  EXPECT_EQ(b.component.labels, testutil::labels_of({0, 1, 0}));
}

TEST(ResolveAndComponent, DiagonalIsNotConnected) {
  Eigen::VectorXd x(4);
  x << 1.0, 0.1, 0.1, 0.5;
  const auto b = resolve_and_component(x, mask_of(2, 2, {1, 0, 0, 1}));
  EXPECT_EQ(b.seed, 0u);
  EXPECT_EQ(b.component.labels, testutil::labels_of({1, 0, 0, 0}));
}

TEST(ResolveAndComponent, AllOnesAndTieBreak) {
  Eigen::VectorXd x(4);
  x << 0.5, -0.5, 0.5, 0.2;
  const auto b = resolve_and_component(x, PatchMask(2, 2, 1));
  EXPECT_EQ(b.seed, 0u);
  EXPECT_EQ(b.component.count_foreground(), 4u);
}

TEST(ResolveAndComponent, OutputInvariantsOnRandomInputs) {
  std::mt19937 gen(3);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(35);
    for (auto& v : x) v = normal(gen);
    const auto plus = resolve_and_component(x, threshold_at_mean(x, 5, 7));
    const auto minus = resolve_and_component(-x, threshold_at_mean(-x, 5, 7));
    EXPECT_EQ(plus.mask.labels[plus.seed], 1);
    // Independent of the solver's sign choice.
    EXPECT_EQ(plus.component, minus.component);
    EXPECT_EQ(plus.mask, minus.mask);
    for (std::size_t i = 0; i < plus.mask.size(); ++i) EXPECT_LE(plus.component.labels[i], plus.mask.labels[i]);
    EXPECT_EQ(connected_component(plus.component, plus.seed), plus.component);
  }
}

TEST(Ncut, PlantedBlockIsRecoveredExactly) {
  std::vector<std::vector<float>> rows;
  PatchMask truth(6, 8);
  for (std::uint32_t r = 0; r < 6; ++r)
    for (std::uint32_t c = 0; c < 8; ++c) {
      const bool fg = r >= 1 && r < 4 && c >= 2 && c < 6;
      truth.labels[r * 8 + c] = fg;
      rows.push_back(fg ? std::vector<float>{0, 1, 0} : std::vector<float>{1, 0, 0});
    }
  const auto b = ncut_bipartition(field_from_rows(6, 8, rows));
  EXPECT_EQ(b.component, truth);
  EXPECT_EQ(b.mask, truth);
}

TEST(InitCls, SinglesOutTheMatchingPatch) {
  const auto field = field_from_rows(2, 2, {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  EXPECT_EQ(init_cls(field, {0, 1, 0, 0}).labels, testutil::labels_of({0, 1, 0, 0}));
}

TEST(InitCls, IdenticalPatchesGiveAllZeros) {
  const auto field = field_from_rows(2, 2, {{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  EXPECT_EQ(init_cls(field, {0.3f, -1.0f}).count_foreground(), 0u);
}

TEST(InitCls, MatchesDirectRecomputation) {
  std::mt19937 gen(21);
  std::normal_distribution<float> normal;
  for (int t = 0; t < 20; ++t) {
    std::vector<std::vector<float>> rows(30, std::vector<float>(6));
    for (auto& r : rows)
      for (auto& v : r) v = normal(gen);
    std::vector<float> cls(6);
    for (auto& v : cls) v = normal(gen);
    std::vector<double> s;
    double mean = 0;
    for (const auto& r : rows) {
      double dot = 0, a = 0, b = 0;
      for (int k = 0; k < 6; ++k) {
        dot += double(r[k]) * cls[k];
        a += double(r[k]) * r[k];
        b += double(cls[k]) * cls[k];
      }
      s.push_back(dot / std::sqrt(a * b));
      mean += s.back() / 30.0;
    }
    const auto mask = init_cls(field_from_rows(5, 6, rows), cls);
    for (int i = 0; i < 30; ++i) EXPECT_EQ(mask.labels[i], s[i] > mean ? 1 : 0);
  }
}

TEST(InitCls, DimensionMismatchIsValidationError) {
  EXPECT_THROW(init_cls(field_from_rows(1, 2, {{1, 0}, {0, 1}}), {1, 0, 0}), ValidationError);
}

TEST(KMeans, BorderBlobIsBackground) {
  std::vector<std::vector<float>> rows;
  PatchMask centre(5, 5);
  for (std::uint32_t i = 0; i < 25; ++i) {
    const bool border = is_border_patch(i, 5, 5);
    centre.labels[i] = !border;
    rows.push_back(border ? std::vector<float>{1, 0.01f * (i % 3)} : std::vector<float>{0.01f * (i % 2), 1});
  }
  const auto r = init_kmeans2(normalize_features(field_from_rows(5, 5, rows)), 5, 1);
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(r.mask, centre);
}

TEST(KMeans, IdenticalPointsAreDegenerate) {
  const auto field = normalize_features(field_from_rows(2, 3, std::vector<std::vector<float>>(6, {0.6f, 0.8f})));
  const auto r = init_kmeans2(field, 5, 1);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.mask.count_foreground(), 0u);
  EXPECT_THROW(init_kmeans2(normalize_features(field_from_rows(1, 1, {{1, 0}})), 5, 1), DegenerateInputError);
}

TEST(KMeans, RecoversLowNoisePlanting) {
  SyntheticSpec spec;
  spec.sigma = 0.01;
  spec.h_patches = spec.w_patches = 24;
  spec.min_side = 5;
  spec.max_side = 10;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto img = make_synthetic_image(spec, 13, i);
    const auto r = init_kmeans2(normalize_features(img.field), 5, 2);
    EXPECT_GE(iou(r.mask, img.truth), 0.99) << i;
  }
}
