#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "predint/dataset.hpp"

namespace predint {

// Single-hidden-layer feed-forward network: in -> hidden (ReLU) -> out
// (linear), with optional inverted dropout on the hidden units.
//
// Parameters live in one flat vector with layer-major ordering, weights
// before biases: w1 (hidden x in, row-major), b1, w2 (out x hidden,
// row-major), b2. This is also the serialization layout.
struct NetParams {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t out_dim = 0;
  double dropout_prob = 0.0;  // p in [0,1)
  std::vector<double> flat;

  static NetParams init(std::size_t in, std::size_t out, double dropout,
                        std::uint64_t seed, std::size_t hidden = 64);

  std::size_t size() const { return flat.size(); }
  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return hidden_dim * in_dim; }
  std::size_t w2_off() const { return b1_off() + hidden_dim; }
  std::size_t b2_off() const { return w2_off() + out_dim * hidden_dim; }
};

std::string serialize_net(const NetParams& net);
NetParams deserialize_net(const std::string& text);

enum class LossTag { mse, gauss_nll, pinball, qd };

struct LossKind {
  LossTag tag = LossTag::mse;
  std::vector<double> levels;  // pinball quantile levels, each in (0,1)
  double alpha = 0.0;          // qd significance; also used by interval stopping
  double lambda_qd = 0.0;
  double softness = 160.0;

  static LossKind mse() { return {LossTag::mse, {}, 0.0, 0.0, 0.0}; }
  static LossKind gauss_nll() { return {LossTag::gauss_nll, {}, 0.0, 0.0, 0.0}; }
  static LossKind pinball(std::vector<double> levels, double alpha = 0.0);
  static LossKind qd(double alpha, double lambda_qd, double softness = 160.0);

  // Number of output heads the loss expects.
  std::size_t out_dim() const;
};

double loss_gauss_nll(double mean, double log_var, double y);
double loss_pinball(double q_hat, double y, double level);

// Direct-interval objective: captured mean width plus a squared
// coverage-shortfall penalty scaled by n/(alpha(1-alpha)). The soft variant
// replaces the containment indicator by a product of logistic sigmoids with
// steepness `softness`; the hard variant is used for evaluation.
double loss_qd(std::span<const double> lower, std::span<const double> upper,
               std::span<const double> y, double alpha, double lambda_qd,
               double softness);
double loss_qd_hard(std::span<const double> lower, std::span<const double> upper,
                    std::span<const double> y, double alpha, double lambda_qd);

// Evaluation-only interval loss with exponential coverage penalty:
// MPIW/range * (1 + exp(lambda * max(0, (1-alpha) - coverage))).
double loss_lube(std::span<const double> lower, std::span<const double> upper,
                 std::span<const double> y, double alpha, double lambda,
                 double range);

// One forward pass. With dropout_active and p > 0 each hidden unit is zeroed
// independently with probability p (mask drawn from `seed`) and survivors are
// scaled by 1/(1-p); the pass is deterministic given (net, x, seed).
std::vector<double> forward(const NetParams& net, std::span<const double> x,
                            bool dropout_active = false, std::uint64_t seed = 0);

// Batch objective without dropout or regularization: the per-sample losses
// are averaged over rows; qd is evaluated as a single batch-level objective.
double batch_loss(const NetParams& net, std::span<const double> features,
                  std::size_t n_rows, std::span<const double> y,
                  const LossKind& loss);
// Same value; also writes the gradient with respect to net.flat.
double batch_loss_grad(const NetParams& net, std::span<const double> features,
                       std::size_t n_rows, std::span<const double> y,
                       const LossKind& loss, std::vector<double>& grad);

// Fast-gradient-sign perturbation of a batch: x + eta .* sign(dL/dx), with
// sign(0) = 0. Row-major features, eta has one non-negative entry per column.
std::vector<double> fgsm_perturb(const NetParams& net,
                                 std::span<const double> features,
                                 std::size_t n_rows, std::span<const double> y,
                                 std::span<const double> eta,
                                 const LossKind& loss);

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t epochs = 100;
  // 0 selects the default rule: full batch when n <= 1024, else 256.
  std::size_t batch_size = 0;
  double l2_lambda = 1e-6;
  enum class Stopping { none, loss, interval } early_stopping = Stopping::none;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  // FGSM-augmented training: total loss L(X) + L(X') with per-column step
  // eta_j = adversarial_eta_scale * range of column j on the training set.
  bool adversarial = false;
  double adversarial_eta_scale = 0.01;
  std::function<void(std::size_t epoch, const NetParams& net)> epoch_observer;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with L2 penalty l2_lambda*|theta|^2
// added to the objective. Deterministic for a fixed (net, data, config) tuple.
// early_stopping == loss restores the parameters with the lowest validation
// loss; interval restores the parameters minimizing mean validation interval
// width among epochs whose validation coverage reaches 1 - loss.alpha (falling
// back to the best-coverage epoch when none qualifies).
NetParams train(const NetParams& net, const Dataset& train_ds, const Dataset* val_ds,
                const TrainConfig& cfg, const LossKind& loss);

}  // namespace predint
