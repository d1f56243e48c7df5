#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>

namespace sslab::detail {

template <typename U>
inline void store_le(std::byte *dst, U v) noexcept {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    dst[i] = static_cast<std::byte>((v >> (8 * i)) & 0xffu);
  }
}

template <typename U>
inline U load_le(const std::byte *src) noexcept {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(std::to_integer<unsigned>(src[i])) << (8 * i);
  }
  return v;
}

inline void store_f64(std::byte *dst, double v) noexcept {
  store_le<std::uint64_t>(dst, std::bit_cast<std::uint64_t>(v));
}

inline double load_f64(const std::byte *src) noexcept {
  return std::bit_cast<double>(load_le<std::uint64_t>(src));
}

}  // namespace sslab::detail
