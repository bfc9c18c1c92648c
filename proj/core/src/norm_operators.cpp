#include "fullnorm/norm_operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

void check_aug(const AffineAug& aug, std::size_t n, const char* who) {
  if (aug.w.cols() != n + 1) {
    throw ContractError(std::string(who) + ": weight has " + std::to_string(aug.w.cols()) +
                        " columns, expected " + std::to_string(n + 1));
  }
}

std::vector<double> affine_then_activate(const AffineAug& aug, Activation sigma,
                                         std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(aug.outputs());
  for (std::size_t i = 0; i < aug.outputs(); ++i) {
    auto wr = aug.w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * x[j];
    acc += wr[n];
    out[i] = activate(sigma, acc);
  }
  return out;
}

}  // namespace

double activate(Activation sigma, double x) {
  return sigma == Activation::relu ? std::max(x, 0.0) : x;
}

StatsProfile stats_of(const Tensor& g_values) {
  auto cs = column_stats(g_values);
  return {std::move(cs.mean), std::move(cs.var)};
}

std::vector<double> apply_norm_operator(const AffineAug& aug, Activation sigma,
                                        const StatsProfile& stats,
                                        std::span<const double> g_value) {
  const std::size_t n = g_value.size();
  if (stats.means.size() != n || stats.vars.size() != n) {
    throw ContractError("apply_norm_operator: statistics do not match input width");
  }
  check_aug(aug, n, "apply_norm_operator");
  std::vector<double> z(n);
  for (std::size_t j = 0; j < n; ++j) {
    z[j] = (g_value[j] - stats.means[j]) / std::sqrt(std::max(stats.vars[j], kVarianceFloor));
  }
  return affine_then_activate(aug, sigma, z);
}

std::vector<double> apply_plain_operator(const AffineAug& aug, Activation sigma,
                                         std::span<const double> g_value) {
  check_aug(aug, g_value.size(), "apply_plain_operator");
  return affine_then_activate(aug, sigma, g_value);
}

AffineAug build_w_prime(const AffineAug& aug, const StatsProfile& stats) {
  const std::size_t n = stats.means.size();
  if (stats.vars.size() != n) throw ContractError("build_w_prime: ragged statistics");
  check_aug(aug, n, "build_w_prime");
  Tensor m(n + 1, n + 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(stats.vars[j] > 0.0)) {
      throw SingularStatsError("build_w_prime: variance of coordinate " + std::to_string(j) +
                               " is not positive");
    }
    const double inv_sd = 1.0 / std::sqrt(stats.vars[j]);
    m(j, j) = inv_sd;
    m(j, n) = -stats.means[j] * inv_sd;
  }
  m(n, n) = 1.0;
  return AffineAug{matmul(aug.w, m)};
}

}  // namespace fullnorm
