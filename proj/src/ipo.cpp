#include "selfment/ipo.hpp"

#include <algorithm>
#include <sstream>

#include "selfment/affinity.hpp"
#include "selfment/errors.hpp"

namespace selfment {

namespace {

struct ClassMeans {
  Eigen::VectorXd fg;
  Eigen::VectorXd bg;
  std::size_t fg_count = 0;
  std::size_t bg_count = 0;
};

ClassMeans class_means(const Eigen::MatrixXd& features, const PatchMask& labels) {
  ClassMeans m;
  m.fg = Eigen::VectorXd::Zero(features.cols());
  m.bg = Eigen::VectorXd::Zero(features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (labels.labels[static_cast<std::size_t>(i)]) {
      m.fg += features.row(i).transpose();
      ++m.fg_count;
    } else {
      m.bg += features.row(i).transpose();
      ++m.bg_count;
    }
  }
  if (m.fg_count) m.fg /= static_cast<double>(m.fg_count);
  if (m.bg_count) m.bg /= static_cast<double>(m.bg_count);
  return m;
}

void check_shapes(const Eigen::MatrixXd& features, const PatchMask& labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ValidationError("IPO: mask has " + std::to_string(labels.size()) + " patches, features have " +
                          std::to_string(features.rows()));
  }
}

}  // namespace

IpoState ipo_init(const Eigen::MatrixXd& features, const PatchMask& init) {
  check_shapes(features, init);
  init.validate();
  const ClassMeans m = class_means(features, init);
  if (m.fg_count == 0 || m.bg_count == 0) {
    throw DegenerateInputError("IPO initialization mask must contain both classes");
  }
  IpoState s;
  s.labels = init;
  s.mu_f = m.fg;
  s.mu_b = m.bg;
  s.reference = m.fg - m.bg;
  const double scale = std::max({m.fg.norm(), m.bg.norm(), 1e-300});
  if (s.reference.norm() <= 1e-9 * scale) {
    throw DegenerateInputError("IPO initialization: foreground and background means coincide");
  }
  return s;
}

IpoState ipo_step(const IpoState& state, const Eigen::MatrixXd& features) {
  check_shapes(features, state.labels);
  IpoState next = state;
  next.last_flipped = false;

  const Eigen::VectorXd sim_f = features * state.mu_f;
  const Eigen::VectorXd sim_b = features * state.mu_b;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    next.labels.labels[static_cast<std::size_t>(i)] = sim_f[i] > sim_b[i] ? 1 : 0;
  }

  const ClassMeans m = class_means(features, next.labels);
  if (m.fg_count > 0) next.mu_f = m.fg;
  if (m.bg_count > 0) next.mu_b = m.bg;
  if (m.fg_count == 0 || m.bg_count == 0) next.empty_class = true;

  if ((next.mu_f - next.mu_b).dot(state.reference) < 0.0) {
    for (auto& v : next.labels.labels) v = v ? 0 : 1;
    std::swap(next.mu_f, next.mu_b);
    ++next.flipped_count;
    next.last_flipped = true;
  }

  std::size_t changed = 0;
  for (std::size_t i = 0; i < next.labels.size(); ++i) {
    changed += next.labels.labels[i] != state.labels.labels[i];
  }
  next.last_changed = changed;
  ++next.iteration;
  return next;
}

IpoResult ipo_run(const Eigen::MatrixXd& features, const PatchMask& init, int iterations) {
  if (iterations < 0) throw ValidationError("IPO iteration count must be >= 0");
  IpoResult out;
  out.state = ipo_init(features, init);
  for (int t = 0; t < iterations; ++t) {
    out.state = ipo_step(out.state, features);
    out.trace.push_back({out.state.iteration, out.state.last_changed, out.state.last_flipped});
    if (out.state.last_changed == 0) break;
  }
  out.labels = out.state.labels;
  return out;
}

IpoResult ipo_run(const FeatureField& normalized, const PatchMask& init, int iterations) {
  return ipo_run(feature_matrix(normalized), init, iterations);
}

std::string format_ipo_trace(const std::vector<IpoTraceRow>& trace) {
  std::ostringstream out;
  out << "iteration,labels_changed,orientation_flipped\n";
  for (const auto& row : trace) {
    out << row.iteration << ',' << row.labels_changed << ',' << (row.orientation_flipped ? 1 : 0) << '\n';
  }
  return out.str();
}

void write_ipo_trace_csv(const std::vector<IpoTraceRow>& trace, const std::filesystem::path& path) {
  write_text_atomic(path, format_ipo_trace(trace));
}

}  // namespace selfment
