#include "selfment/seg_head.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "selfment/affinity.hpp"
#include "selfment/errors.hpp"
#include "selfment/random.hpp"

namespace selfment {

namespace {

constexpr double kDegenerateNorm = 1e-12;

// Logit magnitude at which sigma(l) reaches the probability clamp.
const double kLogitClamp = std::log((1.0 - kProbClamp) / kProbClamp);

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamped_probability(double logit) { return sigmoid(std::clamp(logit, -kLogitClamp, kLogitClamp)); }

/// d p / d l for the clamped probability; zero once the clamp is active.
double clamped_probability_slope(double logit) {
  if (std::abs(logit) >= kLogitClamp) return 0.0;
  const double p = sigmoid(logit);
  return p * (1.0 - p);
}

void check_labels(Eigen::Index n, std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ValidationError("label count " + std::to_string(labels.size()) + " does not match " + std::to_string(n) +
                          " patches");
  }
  if (n < 1) throw ValidationError("losses need at least one patch");
}

template <class Fn>
void for_each_tensor(const HeadParams& p, Fn&& fn) {
  fn(p.w1);
  fn(p.b1);
  fn(p.w2);
  fn(p.b2);
  fn(p.wc);
  fn(p.bc);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[offset + b]) << (8 * b);
  return v;
}

double bce_gradient(double logit, std::uint8_t y) {
  if (std::abs(logit) >= kLogitClamp) return 0.0;
  return sigmoid(logit) - static_cast<double>(y);
}

}  // namespace

std::size_t HeadParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

HeadParams HeadParams::zeros(int dim, int hidden, int embed) {
  if (dim < 1 || hidden < 1 || embed < 1) throw ValidationError("head dimensions must be >= 1");
  HeadParams p;
  p.w1 = Eigen::MatrixXd::Zero(hidden, dim);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::MatrixXd::Zero(embed, hidden);
  p.b2 = Eigen::VectorXd::Zero(embed);
  p.wc = Eigen::MatrixXd::Zero(2, embed);
  p.bc = Eigen::VectorXd::Zero(2);
  return p;
}

HeadParams HeadParams::initialize(int dim, int hidden, int embed, std::uint64_t seed) {
  HeadParams p = zeros(dim, hidden, embed);
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
  };
  fill(p.w1);
  fill(p.w2);
  fill(p.wc);
  return p;
}

Eigen::VectorXd HeadParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for_each_tensor(*this, [&](const auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) flat[pos++] = t(r, c);
  });
  return flat;
}

HeadParams HeadParams::unflatten(int dim, int hidden, int embed, const Eigen::VectorXd& flat) {
  HeadParams p = zeros(dim, hidden, embed);
  if (static_cast<std::size_t>(flat.size()) != p.parameter_count()) {
    throw ValidationError("flat parameter vector has the wrong length");
  }
  Eigen::Index pos = 0;
  auto take = [&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = flat[pos++];
  };
  take(p.w1);
  take(p.b1);
  take(p.w2);
  take(p.b2);
  take(p.wc);
  take(p.bc);
  return p;
}

bool HeadParams::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

void HeadParams::validate() const {
  if (w1.rows() < 1 || w1.cols() < 1 || b1.size() != w1.rows() || w2.cols() != w1.rows() ||
      b2.size() != w2.rows() || wc.rows() != 2 || wc.cols() != w2.rows() || bc.size() != 2) {
    throw ValidationError("head parameter shapes are inconsistent");
  }
  if (!all_finite()) throw ValidationError("head parameters contain non-finite values");
}

HeadForward head_forward(const HeadParams& params, const Eigen::MatrixXd& features) {
  if (features.cols() != params.dim()) {
    throw ValidationError("feature dimension " + std::to_string(features.cols()) + " does not match head input " +
                          std::to_string(params.dim()));
  }
  HeadForward out;
  out.pre_hidden = (features * params.w1.transpose()).rowwise() + params.b1.transpose();
  out.hidden = out.pre_hidden.cwiseMax(0.0);
  out.z_raw = (out.hidden * params.w2.transpose()).rowwise() + params.b2.transpose();
  out.z_norm = out.z_raw.rowwise().norm();
  out.z = Eigen::MatrixXd::Zero(out.z_raw.rows(), out.z_raw.cols());
  out.degenerate.assign(static_cast<std::size_t>(out.z_raw.rows()), 0);
  for (Eigen::Index i = 0; i < out.z_raw.rows(); ++i) {
    if (out.z_norm[i] <= kDegenerateNorm) {
      out.degenerate[static_cast<std::size_t>(i)] = 1;
    } else {
      out.z.row(i) = out.z_raw.row(i) / out.z_norm[i];
    }
  }
  out.logits = (out.z_raw * params.wc.transpose()).rowwise() + params.bc.transpose();
  return out;
}

HeadForward head_forward(const HeadParams& params, const FeatureField& field) {
  return head_forward(params, feature_matrix(field));
}

Eigen::VectorXd foreground_probabilities(const HeadForward& forward) {
  return forward.logits.col(1).unaryExpr([](double l) { return sigmoid(l); });
}

double loss_bce(const Eigen::VectorXd& fg_logits, std::span<const std::uint8_t> labels) {
  check_labels(fg_logits.size(), labels);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < fg_logits.size(); ++i) {
    const double l = std::clamp(fg_logits[i], -kLogitClamp, kLogitClamp);
    // -log sigma(l) = softplus(-l), -log(1 - sigma(l)) = softplus(l)
    sum += labels[static_cast<std::size_t>(i)] ? softplus(-l) : softplus(l);
  }
  return sum / static_cast<double>(fg_logits.size());
}

double soft_dice(const Eigen::VectorXd& probs, std::span<const std::uint8_t> labels, double eps) {
  check_labels(probs.size(), labels);
  double inter = 0.0, p2 = 0.0, y2 = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    inter += probs[i] * y;
    p2 += probs[i] * probs[i];
    y2 += y * y;
  }
  return 1.0 - (2.0 * inter + eps) / (p2 + y2 + eps);
}

double loss_dice(const Eigen::VectorXd& fg_logits, std::span<const std::uint8_t> labels, double eps) {
  return soft_dice(fg_logits.unaryExpr([](double l) { return clamped_probability(l); }), labels, eps);
}

ContrastiveResult loss_contrastive(const Eigen::MatrixXd& z, std::span<const std::uint8_t> degenerate,
                                   std::span<const std::uint8_t> labels, const ContrastiveOptions& options,
                                   bool want_gradient) {
  check_labels(z.rows(), labels);
  if (degenerate.size() != labels.size()) throw ValidationError("degeneracy flags do not match patch count");
  if (!(options.temperature > 0.0)) throw ValidationError("contrastive temperature must be positive");
  if (options.cap < 2) throw ValidationError("contrastive sample cap must be >= 2");

  ContrastiveResult out;
  if (want_gradient) out.grad_z = Eigen::MatrixXd::Zero(z.rows(), z.cols());

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!degenerate[i]) candidates.push_back(i);
  }
  const std::size_t m = std::min(candidates.size(), static_cast<std::size_t>(options.cap));
  if (m < candidates.size()) {
    // Partial Fisher-Yates over the canonical (row-major) candidate order.
    Rng rng(options.seed);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(m);
    std::sort(candidates.begin(), candidates.end());
  }
  out.sample = candidates;
  if (m < 2) {
    out.degenerate = true;
    return out;
  }

  Eigen::MatrixXd zs(static_cast<Eigen::Index>(m), z.cols());
  std::vector<std::uint8_t> ys(m);
  for (std::size_t a = 0; a < m; ++a) {
    zs.row(static_cast<Eigen::Index>(a)) = z.row(static_cast<Eigen::Index>(candidates[a]));
    ys[a] = labels[candidates[a]];
  }
  std::size_t count[2] = {0, 0};
  for (auto y : ys) ++count[y ? 1 : 0];

  const Eigen::MatrixXd sim = (zs * zs.transpose()) / options.temperature;
  Eigen::MatrixXd coeff;
  if (want_gradient) coeff = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));

  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t positives = count[ys[a] ? 1 : 0] - 1;
    if (positives == 0) continue;
    const auto row = static_cast<Eigen::Index>(a);
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k)
      if (k != a) row_max = std::max(row_max, sim(row, static_cast<Eigen::Index>(k)));
    double denom = 0.0;
    double pos_sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (k == a) continue;
      denom += std::exp(sim(row, static_cast<Eigen::Index>(k)) - row_max);
      if (ys[k] == ys[a]) pos_sum += sim(row, static_cast<Eigen::Index>(k));
    }
    const double lse = row_max + std::log(denom);
    total += lse - pos_sum / static_cast<double>(positives);
    ++anchors;
    if (want_gradient) {
      for (std::size_t k = 0; k < m; ++k) {
        if (k == a) continue;
        double g = std::exp(sim(row, static_cast<Eigen::Index>(k)) - lse);
        if (ys[k] == ys[a]) g -= 1.0 / static_cast<double>(positives);
        coeff(row, static_cast<Eigen::Index>(k)) = g;
      }
    }
  }
  if (anchors == 0) {
    out.degenerate = true;
    return out;
  }
  out.loss = total / static_cast<double>(anchors);

  if (want_gradient) {
    coeff /= static_cast<double>(anchors);
    const Eigen::MatrixXd grad_zs = ((coeff + coeff.transpose()) * zs) / options.temperature;
    for (std::size_t a = 0; a < m; ++a) {
      out.grad_z.row(static_cast<Eigen::Index>(candidates[a])) = grad_zs.row(static_cast<Eigen::Index>(a));
    }
  }
  return out;
}

namespace {

LossAndGrads evaluate(const HeadParams& params, const Eigen::MatrixXd& features, std::span<const std::uint8_t> labels,
                      const LossConfig& config, bool backward) {
  const HeadForward fwd = head_forward(params, features);
  check_labels(features.rows(), labels);
  const Eigen::Index n = features.rows();
  const Eigen::VectorXd fg = fwd.logits.col(1);
  const LossWeights& w = config.weights;

  LossAndGrads out;
  out.loss.bce = w.bce != 0.0 ? loss_bce(fg, labels) : 0.0;
  out.loss.dice = w.dice != 0.0 ? loss_dice(fg, labels) : 0.0;
  ContrastiveResult con;
  if (w.con != 0.0) {
    con = loss_contrastive(fwd.z, fwd.degenerate, labels, config.contrastive, backward);
    out.loss.con = con.loss;
    out.contrastive_degenerate = con.degenerate;
  }
  out.loss.total = w.con * out.loss.con + w.dice * out.loss.dice + w.bce * out.loss.bce;
  if (!backward) return out;

  // d total / d foreground logit
  Eigen::VectorXd d_fg = Eigen::VectorXd::Zero(n);
  if (w.bce != 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d_fg[i] += w.bce * bce_gradient(fg[i], labels[static_cast<std::size_t>(i)]) / static_cast<double>(n);
    }
  }
  if (w.dice != 0.0) {
    Eigen::VectorXd p = fg.unaryExpr([](double l) { return clamped_probability(l); });
    double inter = 0.0, p2 = 0.0, y2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = labels[static_cast<std::size_t>(i)];
      inter += p[i] * y;
      p2 += p[i] * p[i];
      y2 += y;
    }
    const double num = 2.0 * inter + kDiceEps;
    const double den = p2 + y2 + kDiceEps;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = labels[static_cast<std::size_t>(i)];
      const double d_p = -(2.0 * y * den - num * 2.0 * p[i]) / (den * den);
      d_fg[i] += w.dice * d_p * clamped_probability_slope(fg[i]);
    }
  }

  HeadParams& g = out.grads;
  g = HeadParams::zeros(params.dim(), params.hidden(), params.embed());
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(n, 2);
  d_logits.col(1) = d_fg;
  g.wc = d_logits.transpose() * fwd.z_raw;
  g.bc = d_logits.colwise().sum().transpose();

  Eigen::MatrixXd d_zraw = d_logits * params.wc;
  if (w.con != 0.0 && !con.degenerate) {
    // Through z = z_raw / ||z_raw||: d z_raw = (I - z z^T) d z / ||z_raw||.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fwd.degenerate[static_cast<std::size_t>(i)]) continue;
      const Eigen::RowVectorXd gz = w.con * con.grad_z.row(i);
      const Eigen::RowVectorXd zi = fwd.z.row(i);
      d_zraw.row(i) += (gz - zi * gz.dot(zi)) / fwd.z_norm[i];
    }
  }
  g.w2 = d_zraw.transpose() * fwd.hidden;
  g.b2 = d_zraw.colwise().sum().transpose();
  Eigen::MatrixXd d_pre = (d_zraw * params.w2).cwiseProduct((fwd.pre_hidden.array() > 0.0).cast<double>().matrix());
  g.w1 = d_pre.transpose() * features;
  g.b1 = d_pre.colwise().sum().transpose();
  return out;
}

}  // namespace

LossAndGrads loss_total_and_grads(const HeadParams& params, const Eigen::MatrixXd& features,
                                  std::span<const std::uint8_t> labels, const LossConfig& config) {
  return evaluate(params, features, labels, config, true);
}

LossBreakdown loss_total(const HeadParams& params, const Eigen::MatrixXd& features,
                         std::span<const std::uint8_t> labels, const LossConfig& config) {
  return evaluate(params, features, labels, config, false).loss;
}

AdamState AdamState::for_params(const HeadParams& params, double lr) {
  AdamState s;
  s.m = HeadParams::zeros(params.dim(), params.hidden(), params.embed());
  s.v = s.m;
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, HeadParams& params, const HeadParams& grads) {
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    if (p.rows() != g.rows() || p.cols() != g.cols() || m.rows() != g.rows() || m.cols() != g.cols()) {
      throw ValidationError("Adam: gradient shape does not match parameters");
    }
    m.array() = state.beta1 * m.array() + (1.0 - state.beta1) * g.array();
    v.array() = state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square();
    p.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  };
  update(params.w1, state.m.w1, state.v.w1, grads.w1);
  update(params.b1, state.m.b1, state.v.b1, grads.b1);
  update(params.w2, state.m.w2, state.v.w2, grads.w2);
  update(params.b2, state.m.b2, state.v.b2, grads.b2);
  update(params.wc, state.m.wc, state.v.wc, grads.wc);
  update(params.bc, state.m.bc, state.v.bc, grads.bc);
}

std::vector<std::uint8_t> encode_checkpoint(const HeadParams& params) {
  params.validate();
  std::vector<std::uint8_t> out = {'S', 'G', 'H', '1'};
  put_u32(out, static_cast<std::uint32_t>(params.dim()));
  put_u32(out, static_cast<std::uint32_t>(params.hidden()));
  put_u32(out, static_cast<std::uint32_t>(params.embed()));
  const Eigen::VectorXd flat = params.flatten();
  out.reserve(out.size() + 4 * static_cast<std::size_t>(flat.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(flat[i])));
  return out;
}

HeadParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "SGH1", 4) != 0) throw FormatError("bad head checkpoint magic", 0);
  const auto dim = get_u32(bytes, 4);
  const auto hidden = get_u32(bytes, 8);
  const auto embed = get_u32(bytes, 12);
  if (dim == 0 || hidden == 0 || embed == 0 || dim > (1u << 24) || hidden > (1u << 24) || embed > (1u << 24)) {
    throw FormatError("head checkpoint dimensions out of range", 4);
  }
  HeadParams shape = HeadParams::zeros(static_cast<int>(dim), static_cast<int>(hidden), static_cast<int>(embed));
  const std::size_t count = shape.parameter_count();
  if (bytes.size() != 16 + 4 * count) {
    throw FormatError("head checkpoint payload is " + std::to_string(bytes.size() - 16) + " bytes, expected " +
                          std::to_string(4 * count),
                      bytes.size());
  }
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    if (!std::isfinite(f)) throw FormatError("non-finite checkpoint value", 16 + 4 * i);
    flat[static_cast<Eigen::Index>(i)] = f;
  }
  return HeadParams::unflatten(static_cast<int>(dim), static_cast<int>(hidden), static_cast<int>(embed), flat);
}

void write_checkpoint(const HeadParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(params));
}

HeadParams read_checkpoint(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace selfment
