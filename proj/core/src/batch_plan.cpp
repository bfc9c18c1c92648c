#include "fullnorm/batch_plan.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <span>

#include "fullnorm/errors.hpp"
#include "fullnorm/rng.hpp"

namespace fullnorm {

namespace {

void chunk_into(std::span<const std::size_t> indices, std::size_t b,
                std::vector<std::vector<std::size_t>>& out) {
  for (std::size_t start = 0; start < indices.size(); start += b) {
    const std::size_t end = std::min(indices.size(), start + b);
    out.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                     indices.begin() + static_cast<std::ptrdiff_t>(end));
  }
}

std::map<int, std::vector<std::size_t>> group_by_label(const Dataset& ds) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.size(); ++i) groups[ds.labels[i]].push_back(i);
  return groups;
}

}  // namespace

const char* to_string(BatchStrategy s) {
  switch (s) {
    case BatchStrategy::shuffled: return "shuffled";
    case BatchStrategy::single_label: return "single_label";
    case BatchStrategy::max_k_labels: return "max_k_labels";
    case BatchStrategy::partitioned: return "partitioned";
  }
  return "?";
}

BatchStrategy parse_batch_strategy(std::string_view name) {
  if (name == "shuffled") return BatchStrategy::shuffled;
  if (name == "single_label") return BatchStrategy::single_label;
  if (name == "max_k_labels") return BatchStrategy::max_k_labels;
  if (name == "partitioned") return BatchStrategy::partitioned;
  throw ConfigError("unknown batch strategy '" + std::string(name) + "'");
}

std::size_t BatchPlan::total_indices() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

BatchPlan make_batch_plan(const Dataset& ds, BatchStrategy strategy, std::size_t batch_size,
                          const PlanParams& params, std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (batch_size == 0 || batch_size > n) {
    throw ContractError("make_batch_plan: batch size " + std::to_string(batch_size) +
                        " outside [1, " + std::to_string(n) + "]");
  }
  BatchPlan plan{strategy, batch_size, params, seed, {}};
  RngStream rng(seed);

  switch (strategy) {
    case BatchStrategy::shuffled: {
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      shuffle_indices(rng, idx);
      chunk_into(idx, batch_size, plan.batches);
      break;
    }
    case BatchStrategy::single_label: {
      for (auto& [label, idx] : group_by_label(ds)) {
        shuffle_indices(rng, idx);
        chunk_into(idx, batch_size, plan.batches);
      }
      break;
    }
    case BatchStrategy::max_k_labels: {
      if (params.k_labels == 0) throw ContractError("make_batch_plan: k_labels must be >= 1");
      const auto groups = group_by_label(ds);
      std::vector<std::size_t> block;
      std::size_t labels_in_block = 0;
      auto flush = [&] {
        shuffle_indices(rng, block);
        chunk_into(block, batch_size, plan.batches);
        block.clear();
        labels_in_block = 0;
      };
      for (const auto& [label, idx] : groups) {
        block.insert(block.end(), idx.begin(), idx.end());
        if (++labels_in_block == params.k_labels) flush();
      }
      if (!block.empty()) flush();
      break;
    }
    case BatchStrategy::partitioned: {
      const std::size_t w = params.workers;
      if (w == 0 || w > n) throw ContractError("make_batch_plan: workers outside [1, N]");
      std::vector<std::vector<std::vector<std::size_t>>> per_worker(w);
      for (std::size_t k = 0; k < w; ++k) {
        const std::size_t lo = k * n / w;
        const std::size_t hi = (k + 1) * n / w;
        std::vector<std::size_t> shard(hi - lo);
        std::iota(shard.begin(), shard.end(), lo);
        shuffle_indices(rng, shard);
        chunk_into(shard, batch_size, per_worker[k]);
      }
      for (std::size_t round = 0;; ++round) {
        bool any = false;
        for (auto& wb : per_worker) {
          if (round < wb.size()) {
            plan.batches.push_back(std::move(wb[round]));
            any = true;
          }
        }
        if (!any) break;
      }
      break;
    }
  }
  if (params.shuffle_order && (strategy == BatchStrategy::single_label ||
                               strategy == BatchStrategy::max_k_labels)) {
    std::vector<std::size_t> order(plan.batches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_indices(rng, order);
    std::vector<std::vector<std::size_t>> permuted;
    permuted.reserve(order.size());
    for (std::size_t i : order) permuted.push_back(std::move(plan.batches[i]));
    plan.batches = std::move(permuted);
  }
  return plan;
}

BatchPlan full_batch_plan(const Dataset& ds) {
  BatchPlan plan;
  plan.batch_size = ds.size();
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  plan.batches.push_back(std::move(all));
  return plan;
}

}  // namespace fullnorm
