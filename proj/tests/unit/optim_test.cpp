#include <gtest/gtest.h>

#include <cmath>

#include "fullnorm/dataset.hpp"
#include "fullnorm/errors.hpp"
#include "fullnorm/estimation.hpp"
#include "fullnorm/optim.hpp"
#include "support.hpp"

using namespace fullnorm;

namespace {

Network single_linear(Tensor w) {
  std::vector<Layer> layers;
  layers.emplace_back(LinearLayer(AffineAug{std::move(w)}));
  layers.emplace_back(NllLayer{});
  return Network(std::move(layers));
}

Network fn_net(std::uint64_t seed, std::size_t in, std::vector<std::size_t> hidden,
               std::size_t classes) {
  RngStream rng(seed);
  return build_mlp(in, hidden, classes, NormKind::fn, true, NormOptions{}, rng);
}

Dataset small_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t c) {
  CompositionalOptions o;
  o.n = n;
  o.d = d;
  o.classes = c;
  return gen_compositional(o, seed);
}

}  // namespace

TEST(Schedule, CorollaryValues) {
  EXPECT_EQ(Schedule::corollary_alpha().value(0), 1.0);
  EXPECT_NEAR(Schedule::corollary_gamma(1.0).value(0), 0.287175, 1e-6);
  EXPECT_NEAR(Schedule::corollary_gamma(1.0).value(0), 0.5 * std::pow(2.0, -0.8), 1e-15);
}

TEST(Schedule, CaptionAlpha) {
  const Schedule a{1.0, 1.0, 20.0, 0.4};
  EXPECT_EQ(a.value(0), 1.0);
  EXPECT_NEAR(a.value(20), 0.757858, 1e-6);
}

TEST(Schedule, RecipeSchedulesAreNonincreasing) {
  const Schedule all[] = {Schedule::corollary_gamma(1.0), Schedule::corollary_alpha(),
                          {1, 1, 20, 0.4}, {1, 1, 5, 0.3}, {1, 1, 20, 0.2}, Schedule::constant(0.01)};
  for (const auto& s : all) {
    double prev = s.value(0);
    for (std::uint64_t k = 1; k <= 1000000; k += 37) {
      const double v = s.value(k);
      ASSERT_GT(v, 0.0);
      ASSERT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(CheckSchedule, CorollaryPairPasses) {
  for (double lg : {1.0, 2.0, 10.0}) {
    const auto r = check_schedule({0.8, 0.4, lg}, Schedule::corollary_gamma(lg),
                                  Schedule::corollary_alpha(), 100000);
    EXPECT_TRUE(r.admissible()) << r.to_text();
  }
}

TEST(CheckSchedule, SlowStepFailsTheCoupling) {
  const Schedule gamma{0.5, 2.0, 1.0, 0.5};
  const auto r = check_schedule({0.5, 0.4, 1.0}, gamma, Schedule::corollary_alpha(), 1000);
  EXPECT_FALSE(r.admissible());
  ASSERT_NE(r.find("a < 2*gamma - 1"), nullptr);
  EXPECT_FALSE(r.find("a < 2*gamma - 1")->passed);
}

TEST(CheckSchedule, EqualExponentsFailOrdering) {
  const Schedule s{0.5, 2.0, 1.0, 0.4};
  const auto r = check_schedule({0.4, 0.4, 1.0}, s, Schedule::corollary_alpha(), 100);
  EXPECT_FALSE(r.find("gamma > a > 0")->passed);
}

TEST(CheckSchedule, RejectsCouplingViolationsOnAGrid) {
  for (double g = 0.55; g < 1.0; g += 0.05)
    for (double a = 0.05; a < 0.5; a += 0.05) {
      const auto r = check_schedule({g, a, 1.0}, {0.5, 2, 1, g}, {1, 1, 1, a}, 1000);
      if (a >= 2 * g - 1) {
        EXPECT_FALSE(r.admissible()) << g << ' ' << a;
      }
    }
}

TEST(CheckSchedule, LargeStepFailsRatio) {
  const auto r = check_schedule({0.8, 0.4, 1.0}, {2.0, 2.0, 1.0, 0.8},
                                Schedule::corollary_alpha(), 100);
  EXPECT_FALSE(r.find("gamma_k L_g / alpha_{k+1} <= 1/2")->passed);
}

TEST(Momentum, TwoUnitSteps) {
  auto net = single_linear(Tensor(1, 1));
  OptimState st;
  const std::vector<Tensor> g = {Tensor(1, 1, 1.0)};
  momentum_update(net, st, g, 1.0, 0.5);
  momentum_update(net, st, g, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(net.linear_layers()[0]->weights().w(0, 0), -2.5);
}

TEST(Momentum, ZeroMomentumIsSgd) {
  auto net = single_linear(Tensor::from_rows({{1, 2}}));
  OptimState st;
  const std::vector<Tensor> g = {Tensor::from_rows({{0.5, -1}})};
  momentum_update(net, st, g, 0.1, 0.0);
  momentum_update(net, st, g, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(net.linear_layers()[0]->weights().w(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(net.linear_layers()[0]->weights().w(0, 1), 2.2);
}

TEST(Momentum, ShapeMismatchThrows) {
  auto net = single_linear(Tensor(1, 2));
  OptimState st;
  const std::vector<Tensor> g = {Tensor(2, 2)};
  EXPECT_THROW(momentum_update(net, st, g, 0.1, 0.0), ContractError);
  EXPECT_THROW(momentum_update(net, st, {}, 0.1, 0.0), ContractError);
}

TEST(Estimation, BlendHalfway) {
  auto net = fn_net(1, 1, {}, 2);
  net.fn_states()[0]->mu = {0.0};
  net.fn_states()[0]->nu = {1.0};
  const int y[] = {1};
  mcsgd_estimation_update(net, Tensor::from_rows({{4}}), y, 0.5);
  EXPECT_DOUBLE_EQ(net.fn_states()[0]->mu[0], 2.0);
  EXPECT_DOUBLE_EQ(net.fn_states()[0]->nu[0], 8.5);
}

TEST(Estimation, RateOneReplacesRateZeroKeeps) {
  auto net = fn_net(2, 2, {3}, 2);
  const auto x = Tensor::from_rows({{1, 2}, {3, -2}});
  const int y[] = {0, 1};
  auto keep = net;
  const auto before = current_estimates(keep);
  mcsgd_estimation_update(keep, x, y, 0.0);
  const auto after = current_estimates(keep);
  for (std::size_t l = 0; l < before.size(); ++l) {
    EXPECT_EQ(before[l].mean, after[l].mean);
    EXPECT_EQ(before[l].mean_sq, after[l].mean_sq);
  }
  mcsgd_estimation_update(net, x, y, 1.0);
  EXPECT_EQ(net.fn_states()[0]->mu, (std::vector<double>{2, 0}));
  EXPECT_EQ(net.fn_states()[0]->nu, (std::vector<double>{5, 4}));
}

TEST(Estimation, EmptyBatchThrows) {
  auto net = fn_net(2, 2, {}, 2);
  EXPECT_THROW(mcsgd_estimation_update(net, Tensor(0, 2), {}, 0.5), EmptyBatchError);
}

TEST(Oracle, NoNormIsPlainGradient) {
  RngStream rng(3);
  auto net = build_mlp(3, std::vector<std::size_t>{4}, 3, NormKind::none, false, {}, rng);
  const auto x = rng_normal(rng, 5, 3);
  const std::vector<int> y = {0, 1, 2, 1, 0};
  auto ref = net;
  ref.forward(x, y);
  const auto expected = ref.backward(FnGradMode::exact);
  mcsgd_estimation_update(net, x, y, 0.3);
  const auto got = gradient_oracle(net, FnGradMode::compositional);
  for (std::size_t l = 0; l < got.size(); ++l) EXPECT_EQ(got[l], expected[l]);
}

TEST(Oracle, ExactStatsOnWholeDatasetGiveFullGradient) {
  const auto ds = small_dataset(4, 12, 3, 3);
  auto net = fn_net(5, 3, {3}, 3);
  mcsgd_estimation_update(net, ds.features, ds.labels, 1.0);
  const auto exact = full_dataset_stats(net, ds);
  const auto est = current_estimates(net);
  for (double e : estimation_error(est, exact)) EXPECT_LE(e, 1e-20);

  const auto oracle = gradient_oracle(net, FnGradMode::compositional);
  const auto plan = full_batch_plan(ds);
  std::vector<Tensor> numeric;
  for (std::size_t l = 0; l < net.linear_layers().size(); ++l) {
    const Tensor& w = net.linear_layers()[l]->weights().w;
    Tensor g(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.size(); ++i) {
      Network p = net, m = net;
      p.linear_layers()[l]->weights().w.data()[i] += 1e-6;
      m.linear_layers()[l]->weights().w.data()[i] -= 1e-6;
      g.data()[i] = (evaluate_objective(p, ds, plan, ObjectiveMode::fn) -
                     evaluate_objective(m, ds, plan, ObjectiveMode::fn)) / 2e-6;
    }
    numeric.push_back(std::move(g));
  }
  EXPECT_LE(fntest::max_rel_error(oracle, numeric), 1e-6);
  const auto full = full_gradient(net, ds);
  EXPECT_LE(fntest::max_rel_error(oracle, full, 1e-12), 1e-10);
}

TEST(Step, ZeroStepMovesOnlyEstimates) {
  auto net = fn_net(6, 2, {3}, 2);
  const auto before = net;
  OptimState st;
  StepConfig cfg;
  cfg.gamma = {0.0, 1.0, 1.0, 0.0};
  const auto x = Tensor::from_rows({{1, 2}, {3, -1}});
  const int y[] = {0, 1};
  mcsgd_step(net, st, x, y, cfg);
  EXPECT_EQ(st.k, 1u);
  for (std::size_t l = 0; l < 2; ++l)
    EXPECT_EQ(net.linear_layers()[l]->weights().w, before.linear_layers()[l]->weights().w);
  EXPECT_NE(net.fn_states()[0]->mu, before.fn_states()[0]->mu);
}

TEST(Step, NoNormStepIsSgd) {
  auto net = single_linear(Tensor::from_rows({{0.1, 0.2, 0.0}, {-0.3, 0.1, 0.2}}));
  const auto x = Tensor::from_rows({{1, -1}});
  const int y[] = {1};
  auto ref = net;
  ref.forward(x, y);
  const auto g = ref.backward(FnGradMode::exact).front();
  OptimState st;
  StepConfig cfg;
  const auto r = mcsgd_step(net, st, x, y, cfg);
  EXPECT_NEAR(r.gamma, 0.5 * std::pow(2.0, -0.8), 1e-15);
  const auto& w = net.linear_layers()[0]->weights().w;
  const auto& w0 = ref.linear_layers()[0]->weights().w;
  for (std::size_t i = 0; i < w.size(); ++i)
    EXPECT_DOUBLE_EQ(w.data()[i], w0.data()[i] - r.gamma * g.data()[i]);
}

TEST(Step, FullRateFullBatchIsGradientDescentOnTheFnObjective) {
  const auto ds = small_dataset(7, 3, 3, 3);
  auto net = fn_net(8, 3, {3}, 3);
  OptimState st;
  StepConfig cfg;
  cfg.alpha = Schedule::constant(1.0);
  cfg.gamma = Schedule::constant(0.2);
  for (int step = 0; step < 10; ++step) {
    const auto full = full_gradient(net, ds);
    const auto r = mcsgd_step(net, st, ds.features, ds.labels, cfg);
    for (std::size_t l = 0; l < full.size(); ++l)
      EXPECT_LE(max_abs_diff(full[l], r.grads[l]), 1e-10) << "step " << step;
  }
}

TEST(Step, Deterministic) {
  const auto ds = small_dataset(9, 40, 4, 3);
  auto run = [&] {
    auto net = fn_net(10, 4, {5, 4}, 3);
    OptimState st;
    StepConfig cfg;
    cfg.momentum = 0.5;
    for (std::size_t i = 0; i + 4 <= ds.size(); i += 4) {
      std::vector<std::size_t> idx = {i, i + 1, i + 2, i + 3};
      std::vector<int> y;
      for (auto j : idx) y.push_back(ds.labels[j]);
      mcsgd_step(net, st, gather_rows(ds.features, idx), y, cfg);
    }
    return net;
  };
  EXPECT_TRUE(run() == run());
}
