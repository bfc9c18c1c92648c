#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fullnorm/network.hpp"
#include "fullnorm/tensor.hpp"

namespace fntest {

using namespace fullnorm;

// Loss of a train-mode forward on a fresh copy, so the norm states are the
// same for every evaluation.
inline double loss_from(const Network& snapshot, const Tensor& x, std::span<const int> labels) {
  Network n = snapshot;
  n.set_mode(Mode::train);
  return n.forward(x, labels).loss;
}

// Central differences of the loss w.r.t. every entry of every linear layer.
inline std::vector<Tensor> numeric_grads(const Network& snapshot, const Tensor& x,
                                         std::span<const int> labels, double h = 1e-6) {
  std::vector<Tensor> out;
  const auto count = snapshot.linear_layers().size();
  for (std::size_t l = 0; l < count; ++l) {
    const Tensor& w = snapshot.linear_layers()[l]->weights().w;
    Tensor g(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.size(); ++i) {
      Network plus = snapshot, minus = snapshot;
      plus.linear_layers()[l]->weights().w.data()[i] += h;
      minus.linear_layers()[l]->weights().w.data()[i] -= h;
      g.data()[i] = (loss_from(plus, x, labels) - loss_from(minus, x, labels)) / (2 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline double max_rel_error(std::span<const Tensor> a, std::span<const Tensor> b,
                            double floor = 1e-2) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t i = 0; i < a[l].size(); ++i) {
      const double x = a[l].data()[i], y = b[l].data()[i];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
    }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fullnorm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fntest
