#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fullnorm/batch_plan.hpp"
#include "fullnorm/errors.hpp"

using namespace fullnorm;

namespace {

Dataset labeled(std::vector<int> labels, std::size_t classes) {
  Dataset ds;
  ds.features = Tensor(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) ds.features(i, 0) = static_cast<double>(i);
  ds.labels = std::move(labels);
  ds.class_count = classes;
  return ds;
}

Dataset cycling(std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((i * 7 + i / 3) % classes);
  return labeled(std::move(y), classes);
}

void expect_partition(const BatchPlan& plan, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& b : plan.batches) {
    EXPECT_FALSE(b.empty());
    EXPECT_LE(b.size(), plan.batch_size);
    for (auto i : b) ++seen.at(i);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(plan.total_indices(), n);
}

std::set<int> labels_of(const Dataset& ds, const std::vector<std::size_t>& b) {
  std::set<int> out;
  for (auto i : b) out.insert(ds.labels[i]);
  return out;
}

}  // namespace

TEST(BatchPlan, SingleLabelHandExample) {
  const auto ds = labeled({0, 0, 1, 1}, 2);
  const auto plan = make_batch_plan(ds, BatchStrategy::single_label, 2, {}, 1);
  ASSERT_EQ(plan.batches.size(), 2u);
  for (const auto& b : plan.batches) EXPECT_EQ(labels_of(ds, b).size(), 1u);
}

TEST(BatchPlan, FullBatch) {
  const auto ds = cycling(17, 3);
  const auto plan = make_batch_plan(ds, BatchStrategy::shuffled, 17, {}, 1);
  ASSERT_EQ(plan.batches.size(), 1u);
  expect_partition(plan, 17);
  const auto full = full_batch_plan(ds);
  ASSERT_EQ(full.batches.size(), 1u);
  EXPECT_EQ(full.batches[0].size(), 17u);
}

TEST(BatchPlan, SeededShuffleIsStable) {
  const auto ds = cycling(50, 5);
  const auto a = make_batch_plan(ds, BatchStrategy::shuffled, 8, {}, 42);
  EXPECT_EQ(a.batches, make_batch_plan(ds, BatchStrategy::shuffled, 8, {}, 42).batches);
  EXPECT_NE(a.batches, make_batch_plan(ds, BatchStrategy::shuffled, 8, {}, 43).batches);
}

TEST(BatchPlan, BatchSizeOutOfRange) {
  const auto ds = cycling(5, 2);
  EXPECT_THROW(make_batch_plan(ds, BatchStrategy::shuffled, 0, {}, 1), ContractError);
  EXPECT_THROW(make_batch_plan(ds, BatchStrategy::shuffled, 6, {}, 1), ContractError);
}

TEST(BatchPlan, ParseStrategy) {
  EXPECT_EQ(parse_batch_strategy("max_k_labels"), BatchStrategy::max_k_labels);
  EXPECT_STREQ(to_string(BatchStrategy::partitioned), "partitioned");
  EXPECT_THROW(parse_batch_strategy("random"), ConfigError);
}

class PlanInvariants : public ::testing::TestWithParam<std::tuple<std::size_t, std::size_t>> {};

TEST_P(PlanInvariants, AllStrategies) {
  const auto [n, b] = GetParam();
  const auto ds = cycling(n, 7);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    expect_partition(make_batch_plan(ds, BatchStrategy::shuffled, b, {}, seed), n);

    for (bool order : {false, true}) {
      PlanParams p;
      p.shuffle_order = order;
      const auto single = make_batch_plan(ds, BatchStrategy::single_label, b, p, seed);
      expect_partition(single, n);
      for (const auto& batch : single.batches) EXPECT_EQ(labels_of(ds, batch).size(), 1u);

      for (std::size_t k : {1u, 3u, 5u}) {
        p.k_labels = k;
        const auto grouped = make_batch_plan(ds, BatchStrategy::max_k_labels, b, p, seed);
        expect_partition(grouped, n);
        for (const auto& batch : grouped.batches) EXPECT_LE(labels_of(ds, batch).size(), k);
      }
    }

    for (std::size_t w : {1u, 2u, 3u}) {
      PlanParams p;
      p.workers = w;
      const auto part = make_batch_plan(ds, BatchStrategy::partitioned, b, p, seed);
      expect_partition(part, n);
      for (const auto& batch : part.batches) {
        std::set<std::size_t> owner;
        for (auto i : batch)
          for (std::size_t k = 0; k < w; ++k)
            if (i >= k * n / w && i < (k + 1) * n / w) owner.insert(k);
        EXPECT_EQ(owner.size(), 1u);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, PlanInvariants,
                         ::testing::Values(std::make_tuple(std::size_t{30}, std::size_t{4}),
                                           std::make_tuple(std::size_t{64}, std::size_t{64}),
                                           std::make_tuple(std::size_t{23}, std::size_t{1}),
                                           std::make_tuple(std::size_t{100}, std::size_t{9})));

TEST(BatchPlan, GroupedOrderFollowsLabels) {
  const auto ds = cycling(40, 4);
  const auto plan = make_batch_plan(ds, BatchStrategy::single_label, 3, {}, 5);
  int prev = -1;
  for (const auto& b : plan.batches) {
    const int y = *labels_of(ds, b).begin();
    EXPECT_GE(y, prev);
    prev = y;
  }
}
