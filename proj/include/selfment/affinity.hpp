#pragma once

#include <Eigen/Dense>

#include "selfment/tensor_io.hpp"

namespace selfment {

inline constexpr double kDefaultTau = 0.2;
inline constexpr double kDefaultEpsFloor = 1e-5;

/// Thresholded patch affinity: weights(i,j) is the cosine similarity of
/// patches i and j when it exceeds `tau`, otherwise exactly `eps_floor`.
/// The diagonal holds the self similarity (1 for normalized features).
struct AffinityGraph {
  Eigen::MatrixXd weights;
  Eigen::VectorXd degree;
  double tau = kDefaultTau;
  double eps_floor = kDefaultEpsFloor;

  Eigen::Index n() const { return weights.rows(); }
};

/// Rescales every patch embedding to unit L2 norm. Throws
/// DegenerateInputError naming the first zero-norm patch.
FeatureField normalize_features(const FeatureField& field);

/// Patch embeddings as an N x D double matrix (one row per patch).
Eigen::MatrixXd feature_matrix(const FeatureField& field);

AffinityGraph build_affinity(const FeatureField& normalized, double tau = kDefaultTau,
                             double eps_floor = kDefaultEpsFloor);

}  // namespace selfment
