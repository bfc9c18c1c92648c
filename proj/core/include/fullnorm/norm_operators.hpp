#pragma once

#include <span>
#include <vector>

#include "fullnorm/tensor.hpp"

namespace fullnorm {

enum class Activation { identity, relu };

/// Floor applied to variances before taking 1/sqrt(var).
inline constexpr double kVarianceFloor = 1e-5;

/// Per-coordinate mean and (population) variance of a function sampled on a
/// set of points.
struct StatsProfile {
  std::vector<double> means;
  std::vector<double> vars;
};

/// Affine map acting on [g; 1]: the last column of `w` is the bias.
struct AffineAug {
  Tensor w;

  std::size_t inputs() const { return w.cols() == 0 ? 0 : w.cols() - 1; }
  std::size_t outputs() const { return w.rows(); }
};

double activate(Activation sigma, double x);

/// Statistics of the value table `g_values` (one row per sample in B).
StatsProfile stats_of(const Tensor& g_values);

/// sigma(W [(g - mean) / sqrt(var); 1]) with var floored at kVarianceFloor.
std::vector<double> apply_norm_operator(const AffineAug& aug, Activation sigma,
                                        const StatsProfile& stats,
                                        std::span<const double> g_value);

/// sigma(W [g; 1]).
std::vector<double> apply_plain_operator(const AffineAug& aug, Activation sigma,
                                         std::span<const double> g_value);

/// Folds the normalization into the weights: W' = W M with
/// M = [diag(1/sqrt(var)), -mean/sqrt(var); 0, 1], so that the plain
/// operator with W' equals the normalized operator with W.
/// Throws SingularStatsError when any var <= 0.
AffineAug build_w_prime(const AffineAug& aug, const StatsProfile& stats);

}  // namespace fullnorm
