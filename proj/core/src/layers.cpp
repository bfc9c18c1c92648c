#include "fullnorm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

void require_width(const Tensor& x, std::size_t d, const char* who) {
  if (x.cols() != d) {
    throw ContractError(std::string(who) + ": input has " + std::to_string(x.cols()) +
                        " columns, layer expects " + std::to_string(d));
  }
}

void require_cache(bool cached, const char* who) {
  if (!cached) throw ContractError(std::string(who) + ": backward called before forward");
}

// Partial derivatives of f(mu, nu, x) = (x - mu) / sqrt(max(nu - mu^2, eps)).
struct FnPartials {
  double dx;
  double dmu;
  double dnu;
};

FnPartials fn_partials(double x, double mu, double nu, double eps) {
  const double var = nu - mu * mu;
  if (var > eps) {
    const double inv_s = 1.0 / std::sqrt(var);
    const double inv_s3 = inv_s * inv_s * inv_s;
    const double centered = x - mu;
    return {inv_s, -inv_s + centered * mu * inv_s3, -0.5 * centered * inv_s3};
  }
  const double inv_s = 1.0 / std::sqrt(eps);
  return {inv_s, -inv_s, 0.0};
}

double fn_inv_denominator(double mu, double nu, double eps) {
  return 1.0 / std::sqrt(std::max(nu - mu * mu, eps));
}

}  // namespace

NormState NormState::initial(std::size_t d, double alpha, double eps) {
  return NormState{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), alpha, eps};
}

// ---------------------------------------------------------------- linear

LinearLayer::LinearLayer(AffineAug weights) : w_(std::move(weights)) {
  if (w_.w.cols() == 0) throw ContractError("LinearLayer: weight needs a bias column");
}

LinearLayer LinearLayer::init_uniform(std::size_t inputs, std::size_t outputs, RngStream& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(inputs));
  return LinearLayer(AffineAug{rng_uniform(rng, -bound, bound, outputs, inputs + 1)});
}

Tensor LinearLayer::forward(const Tensor& x) {
  const std::size_t n = inputs();
  require_width(x, n, "linear");
  const std::size_t m = outputs();
  Tensor out(x.rows(), m);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto orow = out.row(i);
    for (std::size_t o = 0; o < m; ++o) {
      auto wr = w_.w.row(o);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += wr[j] * xr[j];
      orow[o] = acc + wr[n];
    }
  }
  input_ = x;
  cached_ = true;
  return out;
}

Tensor LinearLayer::backward(const Tensor& grad_out) {
  require_cache(cached_, "linear");
  const std::size_t n = inputs();
  const std::size_t m = outputs();
  if (grad_out.rows() != input_.rows() || grad_out.cols() != m) {
    throw ContractError("linear backward: gradient shape does not match last forward");
  }
  Tensor grad_in(input_.rows(), n);
  grad_ = Tensor(m, n + 1);
  for (std::size_t i = 0; i < input_.rows(); ++i) {
    auto xr = input_.row(i);
    auto gi = grad_in.row(i);
    for (std::size_t o = 0; o < m; ++o) {
      const double g = grad_out(i, o);
      if (g == 0.0) continue;
      auto wr = w_.w.row(o);
      auto gw = grad_.row(o);
      for (std::size_t j = 0; j < n; ++j) {
        gi[j] += g * wr[j];
        gw[j] += g * xr[j];
      }
      gw[n] += g;
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- relu

Tensor ReluLayer::forward(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = std::max(v, 0.0);
  input_ = x;
  cached_ = true;
  return out;
}

Tensor ReluLayer::backward(const Tensor& grad_out) const {
  require_cache(cached_, "relu");
  if (!grad_out.same_shape(input_)) throw ContractError("relu backward: shape mismatch");
  Tensor g = grad_out;
  auto in = input_.data();
  auto gd = g.data();
  for (std::size_t i = 0; i < gd.size(); ++i)
    if (!(in[i] > 0.0)) gd[i] = 0.0;
  return g;
}

// ---------------------------------------------------------------- batch norm

Tensor BatchNormLayer::forward(const Tensor& x, Mode mode) {
  const std::size_t d = state_.width();
  require_width(x, d, "bn");
  std::vector<double> center(d);
  inv_sd_.assign(d, 0.0);
  if (mode == Mode::train) {
    if (x.rows() == 0) throw EmptyBatchError("bn: empty batch");
    const auto stats = column_stats(x);
    const double a = state_.alpha;
    for (std::size_t j = 0; j < d; ++j) {
      state_.mu[j] = (1.0 - a) * state_.mu[j] + a * stats.mean[j];
      state_.nu[j] = (1.0 - a) * state_.nu[j] + a * stats.var[j];
      center[j] = stats.mean[j];
      inv_sd_[j] = 1.0 / std::sqrt(stats.var[j] + state_.eps);
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      center[j] = state_.mu[j];
      inv_sd_[j] = 1.0 / std::sqrt(state_.nu[j] + state_.eps);
    }
  }
  Tensor out(x.rows(), d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto orow = out.row(i);
    for (std::size_t j = 0; j < d; ++j) orow[j] = (xr[j] - center[j]) * inv_sd_[j];
  }
  normalized_ = out;
  cached_mode_ = mode;
  cached_ = true;
  return out;
}

Tensor BatchNormLayer::backward(const Tensor& grad_out) const {
  require_cache(cached_, "bn");
  if (!grad_out.same_shape(normalized_)) throw ContractError("bn backward: shape mismatch");
  const std::size_t b = grad_out.rows();
  const std::size_t d = grad_out.cols();
  Tensor grad_in(b, d);
  if (cached_mode_ == Mode::infer) {
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < d; ++j) grad_in(i, j) = grad_out(i, j) * inv_sd_[j];
    return grad_in;
  }
  const double bd = static_cast<double>(b);
  for (std::size_t j = 0; j < d; ++j) {
    double sum_g = 0.0;
    double sum_gy = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      sum_g += grad_out(i, j);
      sum_gy += grad_out(i, j) * normalized_(i, j);
    }
    const double scale = inv_sd_[j] / bd;
    for (std::size_t i = 0; i < b; ++i) {
      grad_in(i, j) = scale * (bd * grad_out(i, j) - sum_g - normalized_(i, j) * sum_gy);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- full norm

Tensor FullNormLayer::forward(const Tensor& x, Mode mode) {
  const std::size_t d = state_.width();
  require_width(x, d, "fn");
  if (mode == Mode::train) {
    if (x.rows() == 0) throw EmptyBatchError("fn: empty batch");
    const auto means = column_stats(x).mean;
    const auto squares = column_mean_of_squares(x);
    const double a = state_.alpha;
    for (std::size_t j = 0; j < d; ++j) {
      state_.mu[j] = (1.0 - a) * state_.mu[j] + a * means[j];
      state_.nu[j] = (1.0 - a) * state_.nu[j] + a * squares[j];
    }
  }
  std::vector<double> inv(d);
  for (std::size_t j = 0; j < d; ++j)
    inv[j] = fn_inv_denominator(state_.mu[j], state_.nu[j], state_.eps);
  Tensor out(x.rows(), d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto orow = out.row(i);
    for (std::size_t j = 0; j < d; ++j) orow[j] = (xr[j] - state_.mu[j]) * inv[j];
  }
  input_ = x;
  mu_ = state_.mu;
  nu_ = state_.nu;
  cached_alpha_ = mode == Mode::train ? state_.alpha : 0.0;
  cached_mode_ = mode;
  cached_ = true;
  return out;
}

Tensor FullNormLayer::backward(const Tensor& grad_out, FnGradMode grad_mode) const {
  require_cache(cached_, "fn");
  if (!grad_out.same_shape(input_)) throw ContractError("fn backward: shape mismatch");
  if (cached_mode_ == Mode::infer) {
    // Statistics were not touched by this batch, only the direct path remains.
    Tensor g(grad_out.rows(), grad_out.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j)
        g(i, j) = grad_out(i, j) * fn_inv_denominator(mu_[j], nu_[j], state_.eps);
    return g;
  }
  return fn_backward(input_, mu_, nu_, state_.eps, cached_alpha_, grad_out, grad_mode);
}

Tensor fn_backward(const Tensor& input, std::span<const double> mu, std::span<const double> nu,
                   double eps, double alpha, const Tensor& grad_out, FnGradMode mode) {
  const std::size_t b = input.rows();
  const std::size_t d = input.cols();
  if (!grad_out.same_shape(input) || mu.size() != d || nu.size() != d) {
    throw ContractError("fn_backward: shape mismatch");
  }
  Tensor grad_in(b, d);
  if (mode == FnGradMode::paper) {
    const double bd = static_cast<double>(b * d);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double x = input(i, j);
        const auto p = fn_partials(x, mu[j], nu[j], eps);
        grad_in(i, j) = grad_out(i, j) * (p.dx + (p.dmu + 2.0 * x * p.dnu) / bd);
      }
    }
    return grad_in;
  }
  const double scale =
      (mode == FnGradMode::exact ? alpha : 1.0) / static_cast<double>(b);
  for (std::size_t j = 0; j < d; ++j) {
    double dl_dmu = 0.0;
    double dl_dnu = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const auto p = fn_partials(input(i, j), mu[j], nu[j], eps);
      dl_dmu += grad_out(i, j) * p.dmu;
      dl_dnu += grad_out(i, j) * p.dnu;
    }
    for (std::size_t i = 0; i < b; ++i) {
      const double x = input(i, j);
      const auto p = fn_partials(x, mu[j], nu[j], eps);
      grad_in(i, j) = grad_out(i, j) * p.dx + scale * (dl_dmu + 2.0 * x * dl_dnu);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- nll

NllResult NllLayer::forward(const Tensor& logits, std::span<const int> labels) {
  const std::size_t b = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != b) throw ContractError("nll: label count does not match batch");
  if (b == 0) throw EmptyBatchError("nll: empty batch");
  probs_ = Tensor(b, c);
  NllResult res;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ContractError("nll: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(c) + ")");
    }
    auto z = logits.row(i);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (z[k] > z[arg]) arg = k;
    const double zmax = z[arg];
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(z[k] - zmax);
    const double log_norm = zmax + std::log(sum);
    auto p = probs_.row(i);
    for (std::size_t k = 0; k < c; ++k) p[k] = std::exp(z[k] - log_norm);
    res.loss += log_norm - z[static_cast<std::size_t>(y)];
    if (arg != static_cast<std::size_t>(y)) ++res.errors;
  }
  res.loss /= static_cast<double>(b);
  labels_.assign(labels.begin(), labels.end());
  cached_ = true;
  return res;
}

Tensor NllLayer::backward() const {
  require_cache(cached_, "nll");
  Tensor g = probs_;
  const double inv_b = 1.0 / static_cast<double>(g.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    g(i, static_cast<std::size_t>(labels_[i])) -= 1.0;
    for (double& v : g.row(i)) v *= inv_b;
  }
  return g;
}

}  // namespace fullnorm
