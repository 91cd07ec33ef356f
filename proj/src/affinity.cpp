#include "selfment/affinity.hpp"

#include <cmath>

#include "selfment/errors.hpp"

namespace selfment {

FeatureField normalize_features(const FeatureField& field) {
  field.validate();
  FeatureField out = field;
  for (std::size_t i = 0; i < field.patch_count(); ++i) {
    auto src = field.patch(i);
    double sq = 0.0;
    for (float v : src) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (norm == 0.0) {
      throw DegenerateInputError("patch " + std::to_string(i) + " of '" + field.image_id +
                                 "' has zero norm");
    }
    auto dst = out.patch(i);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<float>(src[k] / norm);
  }
  return out;
}

Eigen::MatrixXd feature_matrix(const FeatureField& field) {
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> view(field.data.data(), static_cast<Eigen::Index>(field.patch_count()),
                                  static_cast<Eigen::Index>(field.dim));
  return view.cast<double>();
}

AffinityGraph build_affinity(const FeatureField& normalized, double tau, double eps_floor) {
  if (!(eps_floor > 0.0)) throw ValidationError("eps_floor must be positive");
  if (!(eps_floor <= tau)) throw ValidationError("eps_floor must not exceed tau");
  const Eigen::MatrixXd f = feature_matrix(normalized);
  const Eigen::Index n = f.rows();

  AffinityGraph g;
  g.tau = tau;
  g.eps_floor = eps_floor;
  g.weights.resize(n, n);
  // Upper triangle from dot products, mirrored so symmetry is bit-exact.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double s = f.row(i).dot(f.row(j));
      const double w = s > tau ? s : eps_floor;
      g.weights(i, j) = w;
      g.weights(j, i) = w;
    }
  }
  g.degree = g.weights.rowwise().sum();
  return g;
}

}  // namespace selfment
