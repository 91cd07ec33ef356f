#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "selfment/affinity.hpp"
#include "selfment/tensor_io.hpp"

namespace selfment {

struct FiedlerResult {
  Eigen::VectorXd vector;  ///< generalized eigenvector x2, unit L2 norm
  double eigenvalue = 0.0;
  double residual = 0.0;  ///< ||(D-A)x - lambda D x|| / ||D x||
  int iterations = 0;     ///< operator applications
};

/// Second-smallest generalized eigenpair of (D - A) x = lambda D x.
///
/// Works on L_sym = D^{-1/2} (D - A) D^{-1/2} restricted to the complement
/// of its trivial eigenvector D^{1/2} 1. A fully reorthogonalized Lanczos
/// basis is expanded and thick-restarted around the smallest Ritz pairs;
/// convergence is declared on the relative generalized residual. Throws
/// ConvergenceError (with the best residual) after `max_iter` operator
/// applications and DegenerateInputError for graphs with fewer than two nodes.
FiedlerResult fiedler_vector(const AffinityGraph& graph, double tol = 1e-6, int max_iter = 2000);

struct DenseSpectrum {
  Eigen::VectorXd eigenvalues;   ///< ascending
  Eigen::MatrixXd vectors;       ///< generalized eigenvectors, unit L2 columns
  Eigen::MatrixXd orthonormal;   ///< eigenvectors of L_sym
  Eigen::MatrixXd l_sym;
  int sweeps = 0;
};

inline constexpr Eigen::Index kDenseOracleMaxNodes = 512;

/// Full generalized spectrum via cyclic Jacobi rotations on L_sym. Reference
/// path for testing the iterative solver; limited to small graphs.
DenseSpectrum dense_eig_oracle(const AffinityGraph& graph);

Eigen::MatrixXd normalized_laplacian(const AffinityGraph& graph);

/// mask[i] = 1 iff x[i] > mean(x).
PatchMask threshold_at_mean(const Eigen::VectorXd& x, std::uint32_t h_patches, std::uint32_t w_patches);

struct Bipartition {
  Eigen::VectorXd fiedler;
  double lambda2 = 0.0;
  PatchMask mask;       ///< mean-thresholded, sign-resolved so mask[seed] = 1
  std::size_t seed = 0; ///< argmax |x2|, lowest index on ties
  PatchMask component;  ///< 4-connected region of `mask` containing the seed
  double residual = 0.0;
  int iterations = 0;
  bool inverted = false;
};

/// 4-connected component of the foreground of `mask` containing `seed`.
PatchMask connected_component(const PatchMask& mask, std::size_t seed);

/// Picks the seed, flips the mask when the seed fell on the 0 side, and
/// extracts the seed's component.
Bipartition resolve_and_component(const Eigen::VectorXd& x2, const PatchMask& mask);

/// Normalized cut of an already-normalized field: affinity, Fiedler vector,
/// mean threshold, sign resolution, principal component.
Bipartition ncut_bipartition(const FeatureField& normalized, double tau = kDefaultTau,
                             double eps_floor = kDefaultEpsFloor, double tol = 1e-6, int max_iter = 2000);

/// CLS-token baseline: mean-thresholded cosine similarity to the CLS embedding.
PatchMask init_cls(const FeatureField& field, const std::vector<float>& cls_embedding);

struct KMeansResult {
  PatchMask mask;
  bool degenerate = false;
  double objective = 0.0;
};

/// Two-means baseline on normalized embeddings: k-means++ seeding, at most
/// 100 Lloyd iterations, best of `restarts` runs. The cluster with the
/// smaller share of image-border patches is labeled foreground.
KMeansResult init_kmeans2(const FeatureField& normalized, int restarts, std::uint64_t seed);

bool is_border_patch(std::size_t index, std::uint32_t h_patches, std::uint32_t w_patches);

}  // namespace selfment
