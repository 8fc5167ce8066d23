// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "sumshine/error.hpp"

// Little-endian primitives shared by the HIN1 / EMB1 / MLP1 containers.
namespace sumshine::binary {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <typename T>
  requires std::is_arithmetic_v<T>
void write(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T read(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("unexpected end of binary stream");
  return value;
}

template <typename T>
void write_array(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_array(std::istream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw FormatError("unexpected end of binary stream");
}

inline void write_string(std::ostream& out, const std::string& s) {
  write<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1u << 24) {
  const auto len = read<std::uint64_t>(in);
  if (len > max_len) throw FormatError("string length " + std::to_string(len) + " exceeds limit");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("unexpected end of binary stream");
  return s;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  std::array<char, 4> got{};
  in.read(got.data(), 4);
  if (!in || std::memcmp(got.data(), magic, 4) != 0)
    throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace sumshine::binary
