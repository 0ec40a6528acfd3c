#pragma once

// Little-endian helpers for the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

#include "lngram/errors.hpp"

namespace lngram::io {

template <class U>
void write_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = char((value >> (8 * i)) & 0xFFu);
  os.write(buf, sizeof(U));
}

template <class U>
U read_le(std::istream& is) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw LoadError("unexpected end of file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= U(buf[i]) << (8 * i);
  return value;
}

inline void write_f32(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * sizeof(float)));
  } else {
    for (float v : values) write_le(os, std::bit_cast<std::uint32_t>(v));
  }
}

inline void read_f32(std::istream& is, std::span<float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(values.data()), std::streamsize(values.size() * sizeof(float)))) {
      throw LoadError("unexpected end of file in float block");
    }
  } else {
    for (float& v : values) v = std::bit_cast<float>(read_le<std::uint32_t>(is));
  }
}

}  // namespace lngram::io
