#include "fullnorm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <variant>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

// Train-mode forward over the whole dataset with FN layers replacing their
// estimates by the current (= full) batch moments.
Network full_batch_forward(const Network& net, const Dataset& ds) {
  if (ds.size() == 0) throw EmptyBatchError("full-dataset oracle: empty dataset");
  Network copy = net;
  copy.set_mode(Mode::train);
  copy.set_fn_alpha(1.0);
  copy.forward(ds.features, ds.labels);
  return copy;
}

void normalize_columns(Tensor& h) {
  const auto stats = column_stats(h);
  std::vector<double> inv(h.cols());
  for (std::size_t j = 0; j < h.cols(); ++j)
    inv[j] = 1.0 / std::sqrt(std::max(stats.var[j], kVarianceFloor));
  for (std::size_t i = 0; i < h.rows(); ++i) {
    auto r = h.row(i);
    for (std::size_t j = 0; j < h.cols(); ++j) r[j] = (r[j] - stats.mean[j]) * inv[j];
  }
}

// Mean loss of the batch where every normalization layer uses the batch's
// own statistics (or is skipped when `skip_norm`).
double batch_objective(Network& net, const Tensor& x, std::span<const int> labels,
                       bool skip_norm) {
  Tensor h = x;
  auto& layers = net.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    auto& layer = layers[i];
    if (auto* l = std::get_if<LinearLayer>(&layer)) {
      h = l->forward(h);
    } else if (auto* l = std::get_if<ReluLayer>(&layer)) {
      h = l->forward(h);
    } else if (!skip_norm) {
      normalize_columns(h);
    }
  }
  return std::get<NllLayer>(layers.back()).forward(h, labels).loss;
}

}  // namespace

ExactStats full_dataset_stats(const Network& net, const Dataset& ds) {
  const Network done = full_batch_forward(net, ds);
  return current_estimates(done);
}

std::vector<LayerMoments> current_estimates(const Network& net) {
  std::vector<LayerMoments> out;
  for (const auto* s : net.fn_states()) out.push_back({s->mu, s->nu});
  return out;
}

std::vector<double> estimation_error(std::span<const LayerMoments> estimates,
                                     std::span<const LayerMoments> exact) {
  if (estimates.size() != exact.size()) {
    throw ContractError("estimation_error: " + std::to_string(estimates.size()) +
                        " estimated layers vs " + std::to_string(exact.size()) + " exact");
  }
  std::vector<double> out(estimates.size(), 0.0);
  for (std::size_t l = 0; l < estimates.size(); ++l) {
    const auto& e = estimates[l];
    const auto& x = exact[l];
    if (e.mean.size() != x.mean.size() || e.mean_sq.size() != x.mean_sq.size()) {
      throw ContractError("estimation_error: width mismatch at layer " + std::to_string(l));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < e.mean.size(); ++j) {
      const double dm = e.mean[j] - x.mean[j];
      const double dq = e.mean_sq[j] - x.mean_sq[j];
      s += dm * dm + dq * dq;
    }
    out[l] = s;
  }
  return out;
}

std::vector<Tensor> full_gradient(const Network& net, const Dataset& ds, double loss_scale) {
  Network done = full_batch_forward(net, ds);
  return done.backward(FnGradMode::compositional, loss_scale);
}

double full_gradient_norm_sq(const Network& net, const Dataset& ds, double loss_scale) {
  double s = 0.0;
  for (const auto& g : full_gradient(net, ds, loss_scale)) s += squared_norm(g);
  return s;
}

double evaluate_objective(const Network& net, const Dataset& ds, const BatchPlan& plan,
                          ObjectiveMode mode) {
  if (ds.size() == 0) throw EmptyBatchError("evaluate_objective: empty dataset");
  Network copy = net;
  if (mode != ObjectiveMode::bn) {
    return batch_objective(copy, ds.features, ds.labels, mode == ObjectiveMode::plain);
  }
  if (plan.batches.empty()) throw EmptyBatchError("evaluate_objective: empty batch plan");
  double total = 0.0;
  for (const auto& batch : plan.batches) {
    if (batch.empty()) throw EmptyBatchError("evaluate_objective: empty batch in plan");
    const Tensor x = gather_rows(ds.features, batch);
    std::vector<int> y;
    y.reserve(batch.size());
    for (std::size_t i : batch) y.push_back(ds.labels[i]);
    total += batch_objective(copy, x, y, false);
  }
  return total / static_cast<double>(plan.batches.size());
}

void ErrorSeries::append(std::uint64_t iteration, std::vector<double> errors, double grad_norm) {
  if (!sq_error.empty() && errors.size() != layer_count())
    throw ContractError("ErrorSeries: layer count changed");
  k.push_back(iteration);
  sq_error.push_back(std::move(errors));
  grad_norm_sq.push_back(grad_norm);
}

std::vector<double> ErrorSeries::layer(std::size_t i) const {
  std::vector<double> out;
  out.reserve(sq_error.size());
  for (const auto& row : sq_error) out.push_back(row.at(i));
  return out;
}

double loglog_slope(std::span<const std::uint64_t> ks, std::span<const double> values,
                    std::uint64_t k_lo, std::uint64_t k_hi) {
  if (ks.size() != values.size()) throw ContractError("loglog_slope: ragged series");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < k_lo || ks[i] > k_hi) continue;
    if (ks[i] == 0 || !(values[i] > 0.0)) {
      throw ContractError("loglog_slope: nonpositive k or value at k=" + std::to_string(ks[i]));
    }
    const double x = std::log(static_cast<double>(ks[i]));
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 10) {
    throw ContractError("loglog_slope: only " + std::to_string(n) + " points in window");
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  if (denom <= 0.0) throw ContractError("loglog_slope: degenerate window");
  return (dn * sxy - sx * sy) / denom;
}

std::vector<double> loglog_slope(const ErrorSeries& series, std::uint64_t k_lo,
                                 std::uint64_t k_hi) {
  std::vector<double> out;
  for (std::size_t l = 0; l < series.layer_count(); ++l) {
    const auto v = series.layer(l);
    out.push_back(loglog_slope(series.k, v, k_lo, k_hi));
  }
  return out;
}

void write_error_series_csv(std::ostream& out, const ErrorSeries& series) {
  out << "k,layer_index,sq_error,grad_norm_sq\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t p = 0; p < series.k.size(); ++p) {
    for (std::size_t l = 0; l < series.sq_error[p].size(); ++l) {
      out << series.k[p] << ',' << l << ',' << series.sq_error[p][l] << ','
          << series.grad_norm_sq[p] << '\n';
    }
  }
}

}  // namespace fullnorm
