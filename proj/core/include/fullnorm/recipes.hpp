#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fullnorm/experiment.hpp"

namespace fullnorm {

struct RecipeOptions {
  std::filesystem::path out_dir;  // CSVs go to out_dir/<recipe>_<arm>.csv when set
  std::size_t cap = 0;            // training-sample cap; 0 keeps the recipe default
  std::string data_dir;
  std::uint64_t seed = 1;
  bool full_scale = false;  // fig3: the 10000 x 1000 x 1000 dataset instead of the desk variant
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> iterations;
};

struct RecipeArm {
  std::string name;
  ExperimentConfig config;
};

const std::vector<std::string>& recipe_ids();

/// The configs a recipe runs. Throws ConfigError for an unknown id.
std::vector<RecipeArm> recipe_arms(std::string_view id, const RecipeOptions& opts);

struct ArmRun {
  std::string name;
  RunResult result;
};

std::vector<ArmRun> reproduce(std::string_view id, const RecipeOptions& opts);

}  // namespace fullnorm
