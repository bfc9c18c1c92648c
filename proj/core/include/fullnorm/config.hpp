#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fullnorm/batch_plan.hpp"
#include "fullnorm/dataset.hpp"
#include "fullnorm/network.hpp"
#include "fullnorm/optim.hpp"

namespace fullnorm {

/// Flat `key = value` text. `#` starts a comment, `[section]` prefixes the
/// following keys with `section.`. Later assignments override earlier ones.
class KeyValueText {
 public:
  static KeyValueText parse(std::string_view text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string str(const std::string& key, const std::string& fallback);
  double real(const std::string& key, double fallback);
  std::uint64_t count(const std::string& key, std::uint64_t fallback);
  bool flag(const std::string& key, bool fallback);
  std::vector<std::size_t> list(const std::string& key, const std::vector<std::size_t>& fallback);

  /// Keys never read through one of the accessors above.
  std::vector<std::string> unused_keys() const;

 private:
  const std::string* lookup(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 0;

  // dataset
  std::string dataset = "toy3";  // toy3 | large_variation | compositional | mnist | cifar10 | file
  std::string data_dir;          // mnist / cifar10 root; FULLNORM_DATA_DIR when empty
  std::string train_path;        // dataset = file
  std::string test_path;         // dataset = file; empty means test on train
  std::size_t train_cap = 0;     // 0 = no cap
  std::size_t test_cap = 0;
  bool test_on_train = false;
  LargeVariationOptions large_variation;
  CompositionalOptions compositional;
  bool random_scale = false;
  double scale_lo = -2.5;
  double scale_hi = 2.5;

  // model
  std::vector<std::size_t> hidden = {128, 64};
  NormKind norm = NormKind::fn;
  bool input_norm = false;
  bool norm_logits = false;
  double eps = 1e-5;
  double bn_alpha = 0.1;
  FnGradMode fn_grad = FnGradMode::paper;

  // batches
  BatchStrategy strategy = BatchStrategy::shuffled;
  std::size_t batch_size = 64;
  PlanParams plan;

  // optimizer
  Schedule lr = Schedule::constant(0.01);
  Schedule alpha = {1.0, 1.0, 20.0, 0.4};
  double momentum = 0.0;
  double lr_decay_factor = 1.0;
  std::size_t lr_decay_every = 0;  // epochs; 0 = never
  double lg = 1.0;
  bool schedule_override = false;

  // training / evaluation
  std::size_t epochs = 1;
  std::uint64_t max_iterations = 0;  // 0 = run all epochs
  bool log_iterations = true;
  bool oracle = false;
  std::uint64_t oracle_every = 1;
  std::uint64_t oracle_head = 0;  // evaluate every iteration while k <= head
  std::uint64_t oracle_tail = 0;  // ... and during the last `tail` iterations
  bool timing = false;
  std::string note;  // free text copied into the CSV metadata

  std::string output;

  /// Throws ConfigError on unknown keys, bad values, or a missing seed.
  static ExperimentConfig from_text(std::string_view text);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  /// Canonical `key = value` dump; from_text(to_text()) reproduces the config.
  std::string to_text() const;
};

FnGradMode parse_fn_grad_mode(std::string_view name);
const char* to_string(FnGradMode mode);
NormKind parse_norm_kind(std::string_view name);

}  // namespace fullnorm
