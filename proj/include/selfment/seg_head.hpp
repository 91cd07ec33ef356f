#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "selfment/tensor_io.hpp"

namespace selfment {

inline constexpr int kDefaultHidden = 128;
inline constexpr int kDefaultEmbed = 128;
inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDiceEps = 1e-6;
inline constexpr double kDefaultTemperature = 0.1;
inline constexpr int kDefaultContrastiveCap = 1024;

/// Two-layer projection head plus binary classifier:
///   z_raw = W2 relu(W1 f + b1) + b2,   logits = Wc z_raw + bc.
/// Logit row 1 is the foreground logit.
struct HeadParams {
  Eigen::MatrixXd w1;  ///< hidden x dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  ///< embed x hidden
  Eigen::VectorXd b2;
  Eigen::MatrixXd wc;  ///< 2 x embed
  Eigen::VectorXd bc;

  int dim() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int embed() const { return static_cast<int>(w2.rows()); }
  std::size_t parameter_count() const;

  static HeadParams zeros(int dim, int hidden, int embed);
  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static HeadParams initialize(int dim, int hidden, int embed, std::uint64_t seed);

  /// All parameters in declaration order, matrices row-major.
  Eigen::VectorXd flatten() const;
  static HeadParams unflatten(int dim, int hidden, int embed, const Eigen::VectorXd& flat);

  bool all_finite() const;
  void validate() const;
};

struct HeadForward {
  Eigen::MatrixXd pre_hidden;  ///< N x hidden, before ReLU
  Eigen::MatrixXd hidden;      ///< N x hidden
  Eigen::MatrixXd z_raw;       ///< N x embed
  Eigen::VectorXd z_norm;      ///< ||z_raw|| per patch
  Eigen::MatrixXd z;           ///< unit rows; zero rows where degenerate
  std::vector<std::uint8_t> degenerate;
  Eigen::MatrixXd logits;      ///< N x 2

  Eigen::VectorXd foreground_logits() const { return logits.col(1); }
};

/// `features` holds one raw (unnormalized) patch embedding per row.
HeadForward head_forward(const HeadParams& params, const Eigen::MatrixXd& features);
HeadForward head_forward(const HeadParams& params, const FeatureField& field);

/// Foreground probabilities sigma(l1) without clamping.
Eigen::VectorXd foreground_probabilities(const HeadForward& forward);

struct LossBreakdown {
  double con = 0.0;
  double dice = 0.0;
  double bce = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double con = 0.1;
  double dice = 1.0;
  double bce = 1.0;
};

double loss_bce(const Eigen::VectorXd& fg_logits, std::span<const std::uint8_t> labels);
double loss_dice(const Eigen::VectorXd& fg_logits, std::span<const std::uint8_t> labels, double eps = kDiceEps);
/// Dice on probabilities directly: 1 - (2 sum p y + eps) / (sum p^2 + sum y^2 + eps).
double soft_dice(const Eigen::VectorXd& probs, std::span<const std::uint8_t> labels, double eps = kDiceEps);

struct ContrastiveOptions {
  double temperature = kDefaultTemperature;
  int cap = kDefaultContrastiveCap;
  std::uint64_t seed = 0;
};

struct ContrastiveResult {
  double loss = 0.0;
  bool degenerate = false;
  std::vector<std::size_t> sample;  ///< ascending patch indices
  Eigen::MatrixXd grad_z;           ///< N x embed, d loss / d z (filled on request)
};

/// Supervised InfoNCE over a seeded subsample of at most `cap` non-degenerate
/// patches. Anchors without a same-label partner are skipped; the loss is the
/// mean over contributing anchors. Returns 0 with `degenerate` set when no
/// anchor contributes.
ContrastiveResult loss_contrastive(const Eigen::MatrixXd& z, std::span<const std::uint8_t> degenerate,
                                   std::span<const std::uint8_t> labels, const ContrastiveOptions& options,
                                   bool want_gradient = false);

struct LossConfig {
  LossWeights weights;
  ContrastiveOptions contrastive;
};

struct LossAndGrads {
  LossBreakdown loss;
  HeadParams grads;
  bool contrastive_degenerate = false;
};

/// Weighted loss and its analytic gradient with respect to every parameter.
/// A component whose weight is zero is neither evaluated nor differentiated.
LossAndGrads loss_total_and_grads(const HeadParams& params, const Eigen::MatrixXd& features,
                                  std::span<const std::uint8_t> labels, const LossConfig& config);

/// Loss only (no backward pass).
LossBreakdown loss_total(const HeadParams& params, const Eigen::MatrixXd& features,
                         std::span<const std::uint8_t> labels, const LossConfig& config);

struct AdamState {
  HeadParams m;
  HeadParams v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const HeadParams& params, double lr = 1e-3);
};

void adam_step(AdamState& state, HeadParams& params, const HeadParams& grads);

/// "SGH1" + u32 dim, hidden, embed + f32 parameters in declaration order.
std::vector<std::uint8_t> encode_checkpoint(const HeadParams& params);
HeadParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const HeadParams& params, const std::filesystem::path& path);
HeadParams read_checkpoint(const std::filesystem::path& path);

}  // namespace selfment
