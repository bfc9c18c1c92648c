#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fullnorm/rng.hpp"
#include "fullnorm/tensor.hpp"

namespace fullnorm {

/// Labeled samples; features are one row per sample.
struct Dataset {
  Tensor features;
  std::vector<int> labels;
  std::size_t class_count = 0;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return features.cols(); }
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// [0,0,0]->0, [1,1,1]->1, [2,2,2]->2.
Dataset gen_toy3();

struct LargeVariationOptions {
  std::size_t n = 10000;
  std::size_t d = 1000;
  std::size_t classes = 1000;
  double scale_max = 50.0;
  std::size_t test_n = 100;
  bool noise = true;
};

/// Each sample starts at zero, draws a class i, sets element i uniform on
/// [0, scale_max] and adds standard-normal noise to every element.
TrainTest gen_large_variation(const LargeVariationOptions& opts, std::uint64_t seed);

struct CompositionalOptions {
  std::size_t n = 512;
  std::size_t d = 8;
  std::size_t classes = 4;
  double spread = 1.5;       // distance scale of the class centers
  double label_noise = 0.1;  // fraction of labels redrawn uniformly
};

/// Gaussian class clusters with a per-feature affine distortion and label
/// noise, used by the convergence-rate runs.
Dataset gen_compositional(const CompositionalOptions& opts, std::uint64_t seed);

/// IDX files: images magic 2051 (N x rows x cols, u8), labels magic 2049.
/// Pixels are scaled to [0, 1]; class_count is 10.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batches: 3073-byte records (label byte + 3072 pixels).
Dataset load_cifar10_bin(std::span<const std::filesystem::path> paths);

/// Multiplies every sample by its own uniform draw from [lo, hi).
Dataset scale_samples(const Dataset& ds, double lo, double hi, std::uint64_t seed);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Keeps at most `cap` samples, taking labels round-robin in original order
/// so the class mix is preserved.
Dataset stratified_cap(const Dataset& ds, std::size_t cap);

Dataset concat(const Dataset& a, const Dataset& b);

/// Little-endian dataset file:
///   "FNDS1" | u64 N | u64 d | u32 classes | u32 provenance_len | provenance bytes
///   | N*d f64 features | N u32 labels
void save_dataset(std::ostream& out, const Dataset& ds);
Dataset load_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace fullnorm
