#include "fullnorm/optim.hpp"

#include <cmath>
#include <sstream>

#include "fullnorm/errors.hpp"

namespace fullnorm {

double Schedule::value(std::uint64_t k) const {
  if (exponent == 0.0) return scale;
  return scale * std::pow(static_cast<double>(k) / divisor + shift, -exponent);
}

bool ScheduleReport::admissible() const {
  for (const auto& c : conditions)
    if (!c.passed) return false;
  return true;
}

const ConditionResult* ScheduleReport::find(std::string_view name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

std::string ScheduleReport::to_text() const {
  std::ostringstream os;
  for (const auto& c : conditions) {
    os << (c.passed ? "  ok    " : "  FAIL  ") << c.name;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << '\n';
  }
  return os.str();
}

ScheduleReport check_schedule(const ScheduleConstraint& c, const Schedule& gamma,
                              const Schedule& alpha, std::uint64_t horizon) {
  ScheduleReport r;
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  r.conditions.push_back({"gamma > a > 0", c.gamma_exp > c.alpha_exp && c.alpha_exp > 0.0,
                          "gamma=" + num(c.gamma_exp) + ", a=" + num(c.alpha_exp)});
  r.conditions.push_back({"a < 2*gamma - 1", c.alpha_exp < 2.0 * c.gamma_exp - 1.0,
                          num(c.alpha_exp) + " vs " + num(2.0 * c.gamma_exp - 1.0)});
  r.conditions.push_back({"a < 1/2", c.alpha_exp < 0.5, "a=" + num(c.alpha_exp)});

  const bool shapes_ok = gamma.exponent == c.gamma_exp && alpha.exponent == c.alpha_exp &&
                         gamma.divisor > 0.0 && alpha.divisor > 0.0 && gamma.shift > 0.0 &&
                         alpha.shift > 0.0 && gamma.scale > 0.0 && alpha.scale > 0.0;
  r.conditions.push_back({"schedules decay as k^-gamma and k^-a", shapes_ok,
                          "step exponent " + num(gamma.exponent) + ", rate exponent " +
                              num(alpha.exponent)});

  double worst = 0.0;
  std::uint64_t worst_k = 0;
  for (std::uint64_t k = 0; k <= horizon; ++k) {
    const double ratio = gamma.value(k) * c.lg / alpha.value(k + 1);
    if (ratio > worst) {
      worst = ratio;
      worst_k = k;
    }
  }
  r.conditions.push_back({"gamma_k L_g / alpha_{k+1} <= 1/2", worst <= 0.5,
                          "max " + num(worst) + " at k=" + std::to_string(worst_k)});
  return r;
}

void momentum_update(Network& net, OptimState& state, std::span<const Tensor> grads, double lr,
                     double momentum) {
  auto layers = net.linear_layers();
  if (grads.size() != layers.size()) {
    throw ContractError("momentum_update: " + std::to_string(grads.size()) +
                        " gradients for " + std::to_string(layers.size()) + " linear layers");
  }
  if (state.velocity.size() != layers.size()) {
    state.velocity.clear();
    for (const auto* l : layers) state.velocity.emplace_back(l->weights().w.rows(), l->weights().w.cols());
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& w = layers[i]->weights().w;
    auto& v = state.velocity[i];
    if (!grads[i].same_shape(w) || !v.same_shape(w)) {
      throw ContractError("momentum_update: shape mismatch at linear layer " + std::to_string(i));
    }
    auto wd = w.data();
    auto vd = v.data();
    auto gd = grads[i].data();
    for (std::size_t j = 0; j < wd.size(); ++j) {
      vd[j] = momentum * vd[j] + gd[j];
      wd[j] -= lr * vd[j];
    }
  }
}

ForwardResult mcsgd_estimation_update(Network& net, const Tensor& x, std::span<const int> labels,
                                      double alpha_k) {
  if (x.rows() == 0) throw EmptyBatchError("mcsgd: empty batch");
  net.set_mode(Mode::train);
  net.set_fn_alpha(alpha_k);
  return net.forward(x, labels);
}

std::vector<Tensor> gradient_oracle(Network& net, FnGradMode mode) {
  return net.backward(mode);
}

StepResult mcsgd_step(Network& net, OptimState& state, const Tensor& x,
                      std::span<const int> labels, const StepConfig& cfg) {
  StepResult r;
  r.alpha = cfg.alpha.value(state.k);
  r.gamma = cfg.gamma.value(state.k) * cfg.lr_multiplier;
  r.forward = mcsgd_estimation_update(net, x, labels, r.alpha);
  r.grads = gradient_oracle(net, cfg.grad_mode);
  momentum_update(net, state, r.grads, r.gamma, cfg.momentum);
  ++state.k;
  return r;
}

}  // namespace fullnorm
