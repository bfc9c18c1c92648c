#include <gtest/gtest.h>

#include <cmath>

#include "fullnorm/dataset.hpp"
#include "fullnorm/errors.hpp"
#include "fullnorm/norm_operators.hpp"
#include "fullnorm/rng.hpp"

using namespace fullnorm;

namespace {

AffineAug aug(std::initializer_list<std::initializer_list<double>> rows) {
  return {Tensor::from_rows(rows)};
}

}  // namespace

TEST(StatsOf, Toy3) {
  const auto s = stats_of(gen_toy3().features);
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(s.means[j], 1.0);
    EXPECT_DOUBLE_EQ(s.vars[j], 2.0 / 3.0);
  }
}

TEST(StatsOf, SingleSampleHasZeroVariance) {
  const auto s = stats_of(Tensor::from_rows({{1, -2, 5}}));
  for (double v : s.vars) EXPECT_EQ(v, 0.0);
}

TEST(StatsOf, EmptyThrows) { EXPECT_THROW(stats_of(Tensor(0, 2)), EmptyBatchError); }

TEST(StatsOf, VarianceIsMeanSquareMinusSquaredMean) {
  RngStream rng(2);
  const auto g = rng_normal(rng, 40, 5);
  const auto s = stats_of(g);
  const auto ms = column_mean_of_squares(g);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(s.vars[j], ms[j] - s.means[j] * s.means[j], 1e-12);
}

TEST(StatsOf, DuplicatedSetHasSameStats) {
  RngStream rng(3);
  const auto g = rng_normal(rng, 9, 4);
  Tensor twice(18, 4);
  for (std::size_t r = 0; r < 18; ++r)
    for (std::size_t c = 0; c < 4; ++c) twice(r, c) = g(r % 9, c);
  const auto a = stats_of(g), b = stats_of(twice);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(a.means[j], b.means[j], 1e-14);
    EXPECT_NEAR(a.vars[j], b.vars[j], 1e-14);
  }
}

TEST(NormOperator, HandValue) {
  const StatsProfile st{{1.0}, {2.0 / 3.0}};
  const double g[] = {2.0};
  const auto out = apply_norm_operator(aug({{1, 0}}), Activation::identity, st, g);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0], 1.224745, 1e-6);
}

TEST(NormOperator, MeanMapsToZero) {
  const StatsProfile st{{0.5, -2.0}, {3.0, 0.25}};
  const auto out = apply_norm_operator(aug({{1, 2, 0}, {-3, 4, 0}}), Activation::identity, st,
                                       st.means);
  for (double v : out) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(NormOperator, ReluClamps) {
  const StatsProfile st{{0.0}, {1.0}};
  const double g[] = {-3.0};
  EXPECT_EQ(apply_norm_operator(aug({{1, 0}}), Activation::relu, st, g)[0], 0.0);
}

TEST(NormOperator, WidthMismatchThrows) {
  const StatsProfile st{{0.0, 0.0}, {1.0, 1.0}};
  const double g[] = {1.0};
  EXPECT_THROW(apply_norm_operator(aug({{1, 0}}), Activation::identity, st, g), ContractError);
}

TEST(NormOperator, AffineRescaleInvariance) {
  RngStream rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = rng_normal(rng, 12, 3);
    Tensor h = g;
    std::vector<double> a(3), b(3);
    for (std::size_t j = 0; j < 3; ++j) {
      a[j] = rng.uniform(0.5, 3.0) * (rng.below(2) ? 1 : -1);
      b[j] = rng.uniform(-5, 5);
    }
    for (std::size_t r = 0; r < 12; ++r)
      for (std::size_t j = 0; j < 3; ++j) h(r, j) = a[j] * g(r, j) + b[j];
    AffineAug w{rng_normal(rng, 2, 4)};
    // a negative multiplier flips the sign of the normalized coordinate; undo it in W
    AffineAug w_flipped = w;
    for (std::size_t j = 0; j < 3; ++j)
      if (a[j] < 0)
        for (std::size_t i = 0; i < 2; ++i) w_flipped.w(i, j) = -w.w(i, j);
    const auto sg = stats_of(g), sh = stats_of(h);
    for (std::size_t r = 0; r < 12; ++r) {
      const auto p = apply_norm_operator(w, Activation::relu, sg, g.row(r));
      const auto q = apply_norm_operator(w_flipped, Activation::relu, sh, h.row(r));
      for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-10);
    }
  }
}

TEST(PlainOperator, HandValue) {
  const double g[] = {3.0};
  EXPECT_EQ(apply_plain_operator(aug({{1, 2}}), Activation::identity, g)[0], 5.0);
  const double neg[] = {-1.0};
  EXPECT_EQ(apply_plain_operator(aug({{1, 0}}), Activation::relu, neg)[0], 0.0);
}

TEST(PlainOperator, IdentityWeights) {
  const double g[] = {1.5, -2.5};
  const auto out = apply_plain_operator(aug({{1, 0, 0}, {0, 1, 0}}), Activation::identity, g);
  EXPECT_EQ(out, (std::vector<double>{1.5, -2.5}));
}

TEST(WPrime, HandValue) {
  const auto wp = build_w_prime(aug({{2, 0}}), StatsProfile{{1.0}, {4.0}});
  EXPECT_EQ(wp.w, Tensor::from_rows({{1, -1}}));
}

TEST(WPrime, UnitStatsLeaveWeights) {
  const auto w = aug({{1, -2, 3}, {0.5, 4, -1}});
  EXPECT_EQ(build_w_prime(w, StatsProfile{{0, 0}, {1, 1}}).w, w.w);
}

TEST(WPrime, ZeroVarianceThrows) {
  EXPECT_THROW(build_w_prime(aug({{1, 1, 0}}), StatsProfile{{0, 0}, {1, 0}}), SingularStatsError);
}

TEST(WPrime, AbsorptionIdentity) {
  RngStream rng(21);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6), m = 1 + rng.below(6);
    AffineAug w{rng_normal(rng, m, n + 1)};
    StatsProfile st;
    for (std::size_t j = 0; j < n; ++j) {
      st.means.push_back(rng.uniform(-3, 3));
      st.vars.push_back(rng.uniform(0.05, 4));
    }
    const auto g = rng_normal(rng, 1, n);
    const auto sigma = rng.below(2) ? Activation::relu : Activation::identity;
    const auto p = apply_plain_operator(build_w_prime(w, st), sigma, g.row(0));
    const auto q = apply_norm_operator(w, sigma, st, g.row(0));
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(p[i] - q[i]));
  }
  EXPECT_LE(worst, 1e-10);
}
