#include "fullnorm/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo < hi)) throw ContractError("uniform: requires lo < hi");
  return lo + (hi - lo) * uniform01();
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw ContractError("below: n must be positive");
  // Smallest all-ones mask covering n-1, then reject.
  std::uint64_t mask = n - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    const std::uint64_t v = next_u64() & mask;
    if (v < n) return v;
  }
}

RngStream RngStream::substream(std::string_view label, std::uint64_t index) const {
  std::uint64_t sm = seed_ ^ fnv1a(label);
  std::uint64_t derived = splitmix64(sm);
  sm = derived ^ (index * 0xd1b54a32d192ed03ULL);
  derived = splitmix64(sm);
  return RngStream(derived);
}

Tensor rng_uniform(RngStream& stream, double lo, double hi, std::size_t rows,
                   std::size_t cols) {
  if (!(lo < hi)) throw ContractError("rng_uniform: requires lo < hi");
  Tensor t(rows, cols);
  for (double& v : t.data()) v = stream.uniform(lo, hi);
  return t;
}

Tensor rng_normal(RngStream& stream, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = stream.normal();
  return t;
}

void shuffle_indices(RngStream& stream, std::span<std::size_t> indices) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.below(i));
    std::swap(indices[i - 1], indices[j]);
  }
}

}  // namespace fullnorm
