#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fullnorm/dataset.hpp"

namespace fullnorm {

enum class BatchStrategy { shuffled, single_label, max_k_labels, partitioned };

const char* to_string(BatchStrategy s);
BatchStrategy parse_batch_strategy(std::string_view name);

struct PlanParams {
  std::size_t k_labels = 3;  // max_k_labels
  std::size_t workers = 2;   // partitioned
  bool shuffle_order = false;  // single_label, max_k_labels: permute the finished batch sequence
};

/// One epoch's realized partition of the dataset into batches. Tail batches
/// (shorter than batch_size) are kept.
struct BatchPlan {
  BatchStrategy strategy = BatchStrategy::shuffled;
  std::size_t batch_size = 1;
  PlanParams params;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> batches;

  std::size_t total_indices() const;
};

/// shuffled      random permutation chunked by b
/// single_label  label groups (ascending label), shuffled within the group,
///               each group chunked on its own
/// max_k_labels  consecutive blocks of k labels, shuffled within the block,
///               each block chunked on its own
/// partitioned   `workers` contiguous shards, each shuffled and chunked;
///               batches are interleaved round-robin across shards
BatchPlan make_batch_plan(const Dataset& ds, BatchStrategy strategy, std::size_t batch_size,
                          const PlanParams& params, std::uint64_t seed);

/// The plan whose only batch is the whole dataset.
BatchPlan full_batch_plan(const Dataset& ds);

}  // namespace fullnorm
