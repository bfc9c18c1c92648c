#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fullnorm/batch_plan.hpp"
#include "fullnorm/dataset.hpp"
#include "fullnorm/network.hpp"

namespace fullnorm {

/// First and second moments of one normalization layer's input.
struct LayerMoments {
  std::vector<double> mean;
  std::vector<double> mean_sq;
};

/// Exact full-dataset moments, one entry per FN layer in forward order.
using ExactStats = std::vector<LayerMoments>;

/// Layer i's moments are taken over the whole dataset with every earlier
/// FN layer already normalizing by its own exact moments.
ExactStats full_dataset_stats(const Network& net, const Dataset& ds);

/// The (mu, nu) pairs currently stored in the net's FN layers.
std::vector<LayerMoments> current_estimates(const Network& net);

/// Per layer: sum over both moment vectors of the squared difference.
std::vector<double> estimation_error(std::span<const LayerMoments> estimates,
                                     std::span<const LayerMoments> exact);

/// Gradient of the full-normalization objective (every FN layer normalizes by
/// exact full-dataset moments) w.r.t. each linear layer's weights.
std::vector<Tensor> full_gradient(const Network& net, const Dataset& ds, double loss_scale = 1.0);

/// Squared norm of full_gradient.
double full_gradient_norm_sq(const Network& net, const Dataset& ds, double loss_scale = 1.0);

enum class ObjectiveMode { plain, bn, fn };

/// plain: normalization layers skipped, mean loss over the dataset.
/// bn:    each batch of `plan` normalizes by its own statistics; the result
///        is the mean over batches of the per-batch mean loss.
/// fn:    normalization by full-dataset statistics.
/// All normalizations use (x - mean) / sqrt(max(var, kVarianceFloor)).
double evaluate_objective(const Network& net, const Dataset& ds, const BatchPlan& plan,
                          ObjectiveMode mode);

struct ErrorSeries {
  std::vector<std::uint64_t> k;
  std::vector<std::vector<double>> sq_error;  // [point][layer]
  std::vector<double> grad_norm_sq;

  void append(std::uint64_t iteration, std::vector<double> errors, double grad_norm);
  std::size_t layer_count() const { return sq_error.empty() ? 0 : sq_error.front().size(); }
  std::vector<double> layer(std::size_t i) const;
};

/// Least-squares slope of log(value) against log(k) over points with
/// k in [k_lo, k_hi]. Needs at least 10 points, all values positive.
double loglog_slope(std::span<const std::uint64_t> ks, std::span<const double> values,
                    std::uint64_t k_lo, std::uint64_t k_hi);

std::vector<double> loglog_slope(const ErrorSeries& series, std::uint64_t k_lo, std::uint64_t k_hi);

/// CSV with header `k,layer_index,sq_error,grad_norm_sq`, one row per (k, layer).
void write_error_series_csv(std::ostream& out, const ErrorSeries& series);

}  // namespace fullnorm
