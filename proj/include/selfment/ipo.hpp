#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "selfment/tensor_io.hpp"

namespace selfment {

inline constexpr int kDefaultIpoIterations = 20;

/// Iterative patch optimization state: labels, class centroids of the
/// normalized embeddings, and the orientation reference mu_f(0) - mu_b(0).
struct IpoState {
  PatchMask labels;
  Eigen::VectorXd mu_f;
  Eigen::VectorXd mu_b;
  Eigen::VectorXd reference;
  int iteration = 0;
  int flipped_count = 0;

  // Bookkeeping of the most recent step.
  std::size_t last_changed = 0;
  bool last_flipped = false;
  bool empty_class = false;  ///< a class emptied at some step; its centroid was frozen
};

struct IpoTraceRow {
  int iteration = 0;
  std::size_t labels_changed = 0;
  bool orientation_flipped = false;
};

struct IpoResult {
  PatchMask labels;
  std::vector<IpoTraceRow> trace;
  IpoState state;
};

/// `features` holds one unit-norm embedding per row. Throws
/// DegenerateInputError when `init` is single-class or both class means
/// coincide (no usable orientation reference).
IpoState ipo_init(const Eigen::MatrixXd& features, const PatchMask& init);

/// One relabel / recenter / orientation-check step.
IpoState ipo_step(const IpoState& state, const Eigen::MatrixXd& features);

/// Runs at most `iterations` steps, stopping after the first step that
/// changes no label.
IpoResult ipo_run(const Eigen::MatrixXd& features, const PatchMask& init, int iterations = kDefaultIpoIterations);
IpoResult ipo_run(const FeatureField& normalized, const PatchMask& init, int iterations = kDefaultIpoIterations);

/// CSV with header "iteration,labels_changed,orientation_flipped".
std::string format_ipo_trace(const std::vector<IpoTraceRow>& trace);
void write_ipo_trace_csv(const std::vector<IpoTraceRow>& trace, const std::filesystem::path& path);

}  // namespace selfment
