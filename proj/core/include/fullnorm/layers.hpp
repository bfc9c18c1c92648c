#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fullnorm/norm_operators.hpp"
#include "fullnorm/rng.hpp"
#include "fullnorm/tensor.hpp"

namespace fullnorm {

enum class Mode { train, infer };

/// How the FN backward treats the path through the running statistics.
///   paper          the printed per-element rule
///                  g * (df/dx + (df/dmu + 2 x df/dnu) / (b d))
///   exact          true derivative of the stateful forward w.r.t. the batch:
///                  the statistic path is summed per feature and scaled by alpha / b
///   compositional  same per-feature sum scaled by 1 / b (no alpha), i.e. the
///                  stochastic estimate of the full-dataset gradient
enum class FnGradMode { paper, exact, compositional };

/// Running statistics of a normalization layer. For BN `nu` is a variance,
/// for FN it is a mean of squares.
struct NormState {
  std::vector<double> mu;
  std::vector<double> nu;
  double alpha = 0.1;
  double eps = 1e-5;

  static NormState initial(std::size_t d, double alpha, double eps);
  std::size_t width() const { return mu.size(); }
};

class LinearLayer {
 public:
  explicit LinearLayer(AffineAug weights);
  /// Entries uniform on +-sqrt(1/fan_in), bias included.
  static LinearLayer init_uniform(std::size_t inputs, std::size_t outputs, RngStream& rng);

  Tensor forward(const Tensor& x);
  /// Returns grad w.r.t. the input; stores grad w.r.t. the weights (summed
  /// over rows, so batch averaging comes from the loss).
  Tensor backward(const Tensor& grad_out);

  const AffineAug& weights() const { return w_; }
  AffineAug& weights() { return w_; }
  const Tensor& grad() const { return grad_; }
  std::size_t inputs() const { return w_.inputs(); }
  std::size_t outputs() const { return w_.outputs(); }

 private:
  AffineAug w_;
  Tensor input_;
  Tensor grad_;
  bool cached_ = false;
};

class ReluLayer {
 public:
  Tensor forward(const Tensor& x);
  /// Subgradient 0 at x == 0.
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor input_;
  bool cached_ = false;
};

class BatchNormLayer {
 public:
  explicit BatchNormLayer(NormState state) : state_(std::move(state)) {}

  /// Training: normalize by the batch mean/variance and blend them into the
  /// running state. Inference: normalize by the running state, no update.
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out) const;

  const NormState& state() const { return state_; }
  NormState& state() { return state_; }

 private:
  NormState state_;
  Mode cached_mode_ = Mode::train;
  Tensor normalized_;
  std::vector<double> inv_sd_;
  bool cached_ = false;
};

class FullNormLayer {
 public:
  explicit FullNormLayer(NormState state) : state_(std::move(state)) {}

  /// Training: update mu, nu with the batch mean / mean of squares, then
  /// normalize by the updated estimates. Inference skips the update.
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out, FnGradMode grad_mode) const;

  const NormState& state() const { return state_; }
  NormState& state() { return state_; }

 private:
  NormState state_;
  Mode cached_mode_ = Mode::train;
  Tensor input_;
  double cached_alpha_ = 0.0;
  std::vector<double> mu_;
  std::vector<double> nu_;
  bool cached_ = false;
};

struct NllResult {
  double loss = 0.0;
  std::size_t errors = 0;  // argmax != label
};

class NllLayer {
 public:
  /// Mean negative log-likelihood of log-softmax(logits).
  NllResult forward(const Tensor& logits, std::span<const int> labels);
  /// (softmax - onehot) / b.
  Tensor backward() const;

 private:
  Tensor probs_;
  std::vector<int> labels_;
  bool cached_ = false;
};

/// Backward of the FN normalization for given post-update statistics.
/// Exposed for tests and for the full-dataset oracles.
Tensor fn_backward(const Tensor& input, std::span<const double> mu, std::span<const double> nu,
                   double eps, double alpha, const Tensor& grad_out, FnGradMode mode);

}  // namespace fullnorm
