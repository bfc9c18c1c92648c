#pragma once

// Little-endian primitives shared by the checkpoint and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "fullnorm/errors.hpp"

namespace fullnorm::detail {

template <typename U>
void write_le(std::ostream& out, U value) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw FormatError(std::string("truncated stream while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

inline void write_f64(std::ostream& out, double v) {
  write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline void write_magic(std::ostream& out, const char* magic, std::size_t len) {
  out.write(magic, static_cast<std::streamsize>(len));
}

inline void expect_magic(std::istream& in, const char* magic, std::size_t len) {
  std::string got(len, '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(len)) ||
      std::memcmp(got.data(), magic, len) != 0) {
    throw FormatError(std::string("bad magic, expected \"") + std::string(magic, len) + "\"");
  }
}

}  // namespace fullnorm::detail
