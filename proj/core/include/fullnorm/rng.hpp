#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "fullnorm/tensor.hpp"

namespace fullnorm {

/// Portable pseudo-random stream: xoshiro256** whose four state words are
/// filled by consecutive splitmix64 outputs starting from the seed.
///
///   next_u64   xoshiro256** output
///   uniform01  (next_u64 >> 11) * 2^-53, in [0, 1)
///   normal     Box-Muller, one value per call:
///              u1 = 1 - uniform01(), u2 = uniform01(),
///              sqrt(-2 ln u1) * cos(2 pi u2)
///   below(n)   rejection sampling on the top bits (unbiased)
///
/// Sub-streams are derived from (seed, label[, index]) only, never from the
/// current position, so drawing from one stream does not shift another.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  std::uint64_t below(std::uint64_t n);

  RngStream substream(std::string_view label, std::uint64_t index = 0) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

/// i.i.d. uniform entries on [lo, hi).
Tensor rng_uniform(RngStream& stream, double lo, double hi, std::size_t rows,
                   std::size_t cols);

/// i.i.d. standard normal entries.
Tensor rng_normal(RngStream& stream, std::size_t rows, std::size_t cols);

/// Fisher-Yates from the back using `below`.
void shuffle_indices(RngStream& stream, std::span<std::size_t> indices);

}  // namespace fullnorm
