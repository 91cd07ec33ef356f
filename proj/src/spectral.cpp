#include "selfment/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include <Eigen/Eigenvalues>

#include "selfment/errors.hpp"
#include "selfment/random.hpp"

namespace selfment {

namespace {

constexpr std::uint64_t kStartVectorSeed = 0x5e1f3e27;

void check_graph(const AffinityGraph& graph) {
  if (graph.n() < 2) throw DegenerateInputError("affinity graph needs at least two nodes");
  if (graph.weights.cols() != graph.n() || graph.degree.size() != graph.n()) {
    throw ValidationError("affinity graph shapes are inconsistent");
  }
  if ((graph.degree.array() <= 0.0).any()) throw DegenerateInputError("affinity graph has a zero-degree node");
}

/// Krylov workspace for the deflated normalized Laplacian.
class DeflatedLaplacian {
 public:
  explicit DeflatedLaplacian(const AffinityGraph& graph)
      : weights_(graph.weights),
        sqrt_degree_(graph.degree.cwiseSqrt()),
        inv_sqrt_degree_(sqrt_degree_.cwiseInverse()),
        trivial_(sqrt_degree_.normalized()) {}

  Eigen::VectorXd apply(const Eigen::VectorXd& y) const {
    Eigen::VectorXd scaled = inv_sqrt_degree_.cwiseProduct(y);
    Eigen::VectorXd out = y - inv_sqrt_degree_.cwiseProduct(weights_ * scaled);
    return out;
  }

  /// Removes components along the trivial eigenvector and the first `k`
  /// columns of `basis` (classical Gram-Schmidt, applied twice).
  void orthogonalize(Eigen::VectorXd& v, const Eigen::MatrixXd& basis, Eigen::Index k) const {
    for (int pass = 0; pass < 2; ++pass) {
      v -= trivial_ * trivial_.dot(v);
      if (k > 0) {
        Eigen::VectorXd coeffs = basis.leftCols(k).transpose() * v;
        v -= basis.leftCols(k) * coeffs;
      }
    }
  }

  double generalized_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& op_y, double theta) const {
    const double num = sqrt_degree_.cwiseProduct(op_y - theta * y).norm();
    const double den = sqrt_degree_.cwiseProduct(y).norm();
    return num / den;
  }

  const Eigen::VectorXd& inv_sqrt_degree() const { return inv_sqrt_degree_; }

 private:
  const Eigen::MatrixXd& weights_;
  Eigen::VectorXd sqrt_degree_;
  Eigen::VectorXd inv_sqrt_degree_;
  Eigen::VectorXd trivial_;
};

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

Eigen::MatrixXd normalized_laplacian(const AffinityGraph& graph) {
  check_graph(graph);
  const Eigen::VectorXd inv_s = graph.degree.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd l = -(inv_s.asDiagonal() * graph.weights * inv_s.asDiagonal());
  l.diagonal().array() += 1.0;
  return 0.5 * (l + l.transpose());
}

FiedlerResult fiedler_vector(const AffinityGraph& graph, double tol, int max_iter) {
  check_graph(graph);
  if (!(tol > 0.0)) throw ValidationError("solver tolerance must be positive");
  const Eigen::Index n = graph.n();
  const DeflatedLaplacian op(graph);

  // The deflated space has dimension n - 1; a basis that spans it makes the
  // Rayleigh-Ritz step exact.
  const Eigen::Index capacity = std::min<Eigen::Index>(n - 1, 48);
  const Eigen::Index keep = std::max<Eigen::Index>(1, std::min<Eigen::Index>(capacity / 3, 8));
  const double target = tol * 1e-4;

  Eigen::MatrixXd basis(n, capacity);
  Eigen::MatrixXd op_basis(n, capacity);
  Eigen::Index k = 0;
  int matvecs = 0;
  Rng rng(kStartVectorSeed);

  auto append = [&](Eigen::VectorXd v) {
    const double scale = v.norm();
    if (scale == 0.0) return false;
    op.orthogonalize(v, basis, k);
    const double norm = v.norm();
    if (norm <= 1e-10 * scale) return false;
    basis.col(k) = v / norm;
    op_basis.col(k) = op.apply(basis.col(k));
    ++matvecs;
    ++k;
    return true;
  };
  auto append_or_random = [&](const Eigen::VectorXd& v) {
    if (append(v)) return true;
    for (int attempt = 0; attempt < 4; ++attempt) {
      if (append(random_vector(rng, n))) return true;
    }
    return false;
  };

  if (!append_or_random(random_vector(rng, n))) {
    throw DegenerateInputError("could not build a start vector orthogonal to the trivial eigenvector");
  }

  FiedlerResult best;
  best.residual = std::numeric_limits<double>::infinity();
  double previous_residual = std::numeric_limits<double>::infinity();

  while (true) {
    bool exhausted = false;
    while (k < capacity && matvecs < max_iter) {
      if (!append_or_random(op_basis.col(k - 1))) {
        exhausted = true;
        break;
      }
    }

    Eigen::MatrixXd projected = basis.leftCols(k).transpose() * op_basis.leftCols(k);
    projected = 0.5 * (projected + projected.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(projected);
    const Eigen::MatrixXd& coeffs = ritz.eigenvectors();

    Eigen::VectorXd y = basis.leftCols(k) * coeffs.col(0);
    Eigen::VectorXd op_y = op_basis.leftCols(k) * coeffs.col(0);
    const double scale = y.norm();
    y /= scale;
    op_y /= scale;
    const double theta = y.dot(op_y);
    const double residual = op.generalized_residual(y, op_y, theta);

    if (residual < best.residual) {
      best.residual = residual;
      best.eigenvalue = theta;
      best.vector = op.inv_sqrt_degree().cwiseProduct(y);
    }
    best.iterations = matvecs;

    const bool stalled = residual <= tol && residual > 0.5 * previous_residual;
    if (residual <= target || stalled || exhausted || k == n - 1) break;
    if (matvecs >= max_iter) break;
    previous_residual = residual;

    // Thick restart: keep the smallest Ritz pairs, continue from the residual.
    const Eigen::Index kept = std::min(keep, k);
    Eigen::MatrixXd new_basis = basis.leftCols(k) * coeffs.leftCols(kept);
    Eigen::MatrixXd new_op_basis = op_basis.leftCols(k) * coeffs.leftCols(kept);
    basis.leftCols(kept) = new_basis;
    op_basis.leftCols(kept) = new_op_basis;
    k = kept;
    if (!append_or_random(op_y - theta * y)) break;
  }

  if (!(best.residual <= tol)) {
    throw ConvergenceError("Fiedler solve did not converge within " + std::to_string(max_iter) +
                               " iterations (best residual " + std::to_string(best.residual) + ")",
                           best.residual);
  }
  best.vector.normalize();
  return best;
}

DenseSpectrum dense_eig_oracle(const AffinityGraph& graph) {
  check_graph(graph);
  const Eigen::Index n = graph.n();
  if (n > kDenseOracleMaxNodes) {
    throw ValidationError("dense eigen oracle is limited to " + std::to_string(kDenseOracleMaxNodes) + " nodes");
  }
  DenseSpectrum out;
  out.l_sym = normalized_laplacian(graph);
  Eigen::MatrixXd a = out.l_sym;
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  while (off_norm() >= 1e-10 && out.sweeps < kMaxSweeps) {
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index r = p + 1; r < n; ++r) {
        const double apr = a(p, r);
        if (apr == 0.0) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the (p, r) Givens rotation.
        for (Eigen::Index i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double air = a(i, r);
          a(i, p) = c * aip - s * air;
          a(i, r) = s * aip + c * air;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double ari = a(r, i);
          a(p, i) = c * api - s * ari;
          a(r, i) = s * api + c * ari;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double qip = q(i, p);
          const double qir = q(i, r);
          q(i, p) = c * qip - s * qir;
          q(i, r) = s * qip + c * qir;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  const Eigen::VectorXd inv_s = graph.degree.cwiseSqrt().cwiseInverse();
  out.eigenvalues.resize(n);
  out.orthonormal.resize(n, n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.eigenvalues[j] = a(src, src);
    out.orthonormal.col(j) = q.col(src);
    out.vectors.col(j) = inv_s.cwiseProduct(q.col(src)).normalized();
  }
  return out;
}

PatchMask threshold_at_mean(const Eigen::VectorXd& x, std::uint32_t h_patches, std::uint32_t w_patches) {
  if (static_cast<std::size_t>(x.size()) != static_cast<std::size_t>(h_patches) * w_patches) {
    throw ValidationError("vector length does not match the patch grid");
  }
  const double mean = x.sum() / static_cast<double>(x.size());
  PatchMask mask(h_patches, w_patches);
  for (Eigen::Index i = 0; i < x.size(); ++i) mask.labels[static_cast<std::size_t>(i)] = x[i] > mean ? 1 : 0;
  return mask;
}

PatchMask connected_component(const PatchMask& mask, std::size_t seed) {
  PatchMask out(mask.h_patches, mask.w_patches);
  if (seed >= mask.size() || mask.labels[seed] == 0) return out;
  const std::size_t w = mask.w_patches;
  const std::size_t h = mask.h_patches;
  std::queue<std::size_t> frontier;
  frontier.push(seed);
  out.labels[seed] = 1;
  auto visit = [&](std::size_t idx) {
    if (mask.labels[idx] == 1 && out.labels[idx] == 0) {
      out.labels[idx] = 1;
      frontier.push(idx);
    }
  };
  while (!frontier.empty()) {
    const std::size_t idx = frontier.front();
    frontier.pop();
    const std::size_t row = idx / w;
    const std::size_t col = idx % w;
    if (row > 0) visit(idx - w);
    if (row + 1 < h) visit(idx + w);
    if (col > 0) visit(idx - 1);
    if (col + 1 < w) visit(idx + 1);
  }
  return out;
}

Bipartition resolve_and_component(const Eigen::VectorXd& x2, const PatchMask& mask) {
  if (static_cast<std::size_t>(x2.size()) != mask.size() || mask.size() == 0) {
    throw ValidationError("eigenvector and mask sizes disagree");
  }
  Bipartition out;
  out.fiedler = x2;
  std::size_t seed = 0;
  for (std::size_t i = 1; i < mask.size(); ++i) {
    if (std::abs(x2[static_cast<Eigen::Index>(i)]) > std::abs(x2[static_cast<Eigen::Index>(seed)])) seed = i;
  }
  out.seed = seed;
  out.mask = mask;
  if (mask.labels[seed] == 0) {
    for (auto& v : out.mask.labels) v = v ? 0 : 1;
    out.inverted = true;
  }
  out.component = connected_component(out.mask, seed);
  return out;
}

Bipartition ncut_bipartition(const FeatureField& normalized, double tau, double eps_floor, double tol,
                             int max_iter) {
  const AffinityGraph graph = build_affinity(normalized, tau, eps_floor);
  const FiedlerResult solve = fiedler_vector(graph, tol, max_iter);
  Bipartition out =
      resolve_and_component(solve.vector, threshold_at_mean(solve.vector, normalized.h_patches, normalized.w_patches));
  out.lambda2 = solve.eigenvalue;
  out.residual = solve.residual;
  out.iterations = solve.iterations;
  return out;
}

PatchMask init_cls(const FeatureField& field, const std::vector<float>& cls_embedding) {
  if (cls_embedding.size() != field.dim) {
    throw ValidationError("CLS embedding has dimension " + std::to_string(cls_embedding.size()) +
                          ", field has " + std::to_string(field.dim));
  }
  double cls_sq = 0.0;
  for (float v : cls_embedding) cls_sq += static_cast<double>(v) * v;
  if (cls_sq == 0.0) throw ValidationError("CLS embedding has zero norm");
  const double cls_norm = std::sqrt(cls_sq);

  Eigen::VectorXd sim(static_cast<Eigen::Index>(field.patch_count()));
  for (std::size_t i = 0; i < field.patch_count(); ++i) {
    auto f = field.patch(i);
    double dot = 0.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      dot += static_cast<double>(f[k]) * cls_embedding[k];
      sq += static_cast<double>(f[k]) * f[k];
    }
    sim[static_cast<Eigen::Index>(i)] = sq > 0.0 ? dot / (std::sqrt(sq) * cls_norm) : 0.0;
  }
  return threshold_at_mean(sim, field.h_patches, field.w_patches);
}

}  // namespace selfment
