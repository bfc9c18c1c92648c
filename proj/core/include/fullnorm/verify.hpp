#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fullnorm/recipes.hpp"

namespace fullnorm {

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::string kind;
  std::vector<Assertion> assertions;

  bool passed() const;
  std::string to_text() const;
};

struct VerifyOptions {
  std::optional<double> tol;  // grads: 1e-6, absorption: 1e-10
  std::size_t instances = 0;  // 0 = default (grads 50, absorption 200)
  std::uint64_t seed = 7;
  // schedules
  double gamma_exp = 0.8;
  double alpha_exp = 0.4;
  double lg = 1.0;
  std::uint64_t horizon = 100000;
  // rates
  RecipeOptions recipe;
  std::uint64_t slope_lo = 1000;
  std::uint64_t slope_hi = 100000;
  double slope_min = -0.8;
  double slope_max = -0.2;
  std::uint64_t grad_window = 1000;
  double grad_ratio = 0.1;
};

/// kind: grads | schedules | rates | absorption. Throws ConfigError otherwise.
VerifyReport verify(std::string_view kind, const VerifyOptions& opts);

/// Exact-mode backward against central differences on random small nets
/// mixing linear, relu, BN and FN layers with an nll head. Relative error
/// is |a - n| / max(|a|, |n|, 1e-2).
VerifyReport verify_grads(const VerifyOptions& opts);

/// check_schedule on gamma_k = 1/(2 L_g) (k+2)^-gamma, alpha_k = (k+1)^-a,
/// and on the schedules of the rates recipe.
VerifyReport verify_schedules(const VerifyOptions& opts);

/// Slope band of each layer's estimation error and the decay of the exact
/// gradient norm, both read from a finished rates run.
VerifyReport verify_rate_run(const RunResult& run, const VerifyOptions& opts);
VerifyReport verify_rates(const VerifyOptions& opts);

/// Normalized operator with W against the plain operator with W' = W M.
VerifyReport verify_absorption(const VerifyOptions& opts);

}  // namespace fullnorm
