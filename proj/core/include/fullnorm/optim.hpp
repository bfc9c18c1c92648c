#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fullnorm/network.hpp"

namespace fullnorm {

/// value(k) = scale * (k / divisor + shift)^(-exponent)
struct Schedule {
  double scale = 1.0;
  double shift = 1.0;
  double divisor = 1.0;
  double exponent = 0.0;

  double value(std::uint64_t k) const;

  static Schedule constant(double v) { return {v, 1.0, 1.0, 0.0}; }
  /// 1/(2 L_g) (k + 2)^(-4/5)
  static Schedule corollary_gamma(double lg) { return {1.0 / (2.0 * lg), 2.0, 1.0, 0.8}; }
  /// (k + 1)^(-2/5)
  static Schedule corollary_alpha() { return {1.0, 1.0, 1.0, 0.4}; }
};

/// Decay exponents of the step size (gamma) and approximation rate (a),
/// plus the oracle-error constant L_g.
struct ScheduleConstraint {
  double gamma_exp = 0.8;
  double alpha_exp = 0.4;
  double lg = 1.0;
};

struct ConditionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ScheduleReport {
  std::vector<ConditionResult> conditions;

  bool admissible() const;
  const ConditionResult* find(std::string_view name) const;
  std::string to_text() const;
};

/// Checks gamma > a > 0, a < 2 gamma - 1, a < 1/2, that the schedules decay
/// with the stated exponents, and gamma_k L_g / alpha_{k+1} <= 1/2 for
/// every k <= horizon. Failures are reported, never thrown.
ScheduleReport check_schedule(const ScheduleConstraint& c, const Schedule& gamma,
                              const Schedule& alpha, std::uint64_t horizon);

struct OptimState {
  std::uint64_t k = 0;
  std::vector<Tensor> velocity;  // one per linear layer, lazily shaped
};

/// v <- momentum * v + g; w <- w - lr * v, per linear layer.
void momentum_update(Network& net, OptimState& state, std::span<const Tensor> grads, double lr,
                     double momentum);

/// One training-mode forward with every FN layer blending at rate alpha_k.
/// This is the estimate update; the caches it leaves feed gradient_oracle.
ForwardResult mcsgd_estimation_update(Network& net, const Tensor& x, std::span<const int> labels,
                                      double alpha_k);

/// Backward through the cached forward, using the just-updated estimates
/// in every normalization layer. Throws if no forward has been run.
std::vector<Tensor> gradient_oracle(Network& net, FnGradMode mode);

struct StepConfig {
  Schedule gamma = Schedule::corollary_gamma(1.0);
  Schedule alpha = Schedule::corollary_alpha();
  double momentum = 0.0;
  double lr_multiplier = 1.0;
  FnGradMode grad_mode = FnGradMode::compositional;
};

struct StepResult {
  ForwardResult forward;
  double gamma = 0.0;
  double alpha = 0.0;
  std::vector<Tensor> grads;
};

/// Estimate update, oracle call, weight update, k += 1, in that order.
StepResult mcsgd_step(Network& net, OptimState& state, const Tensor& x,
                      std::span<const int> labels, const StepConfig& cfg);

}  // namespace fullnorm
