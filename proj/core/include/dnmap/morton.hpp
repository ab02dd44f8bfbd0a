#pragma once

#include <array>
#include <cstdint>

namespace dnmap {

/// Bits per axis in a 3D Morton code; three axes fit one 64-bit word.
inline constexpr unsigned kMortonAxisBits = 21;
inline constexpr std::uint32_t kMortonAxisLimit = 1u << kMortonAxisBits;

/// Interleaves x, y, z (x in the lowest bit of each triad).
/// Throws std::out_of_range if any coordinate is >= 2^21.
std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z);

std::array<std::uint32_t, 3> morton_decode(std::uint64_t code);

struct MortonKey {
  int level = 0;
  std::uint64_t code = 0;

  friend auto operator<=>(const MortonKey&, const MortonKey&) = default;
};

}  // namespace dnmap
