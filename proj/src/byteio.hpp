#pragma once

// Little-endian stream helpers shared by the vector, model and index formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <type_traits>

#include "qadc/vecio.hpp"

namespace qadc::detail {

template <typename T>
T byteswap(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
    std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
void to_little_endian(std::span<T> values) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (auto& v : values) v = byteswap(v);
  }
}

template <typename T>
void write_le(std::ostream& out, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (T v : values) {
      T s = byteswap(v);
      out.write(reinterpret_cast<const char*>(&s), sizeof(T));
    }
  } else {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  write_le(out, std::span<const T>(&value, 1));
}

/// Reads exactly values.size() items; returns false if the stream ran short.
template <typename T>
bool read_le(std::istream& in, std::span<T> values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size_bytes()));
  if (static_cast<std::size_t>(in.gcount()) != values.size_bytes()) return false;
  to_little_endian(values);
  return true;
}

template <typename T>
T read_le_or_throw(std::istream& in, const char* what) {
  T value{};
  if (!read_le(in, std::span<T>(&value, 1))) {
    throw FormatError(std::string("truncated ") + what);
  }
  return value;
}

template <typename T>
void read_le_or_throw(std::istream& in, std::span<T> values, const char* what) {
  if (!read_le(in, values)) throw FormatError(std::string("truncated ") + what);
}

}  // namespace qadc::detail
