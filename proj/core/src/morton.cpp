#include "dnmap/morton.hpp"

#include <stdexcept>
#include <string>

namespace dnmap {
namespace {

std::uint64_t spread_bits(std::uint64_t a) {
  a &= 0x1fffff;
  a = (a | a << 32) & 0x1f00000000ffffULL;
  a = (a | a << 16) & 0x1f0000ff0000ffULL;
  a = (a | a << 8) & 0x100f00f00f00f00fULL;
  a = (a | a << 4) & 0x10c30c30c30c30c3ULL;
  a = (a | a << 2) & 0x1249249249249249ULL;
  return a;
}

std::uint32_t compact_bits(std::uint64_t a) {
  a &= 0x1249249249249249ULL;
  a = (a ^ (a >> 2)) & 0x10c30c30c30c30c3ULL;
  a = (a ^ (a >> 4)) & 0x100f00f00f00f00fULL;
  a = (a ^ (a >> 8)) & 0x1f0000ff0000ffULL;
  a = (a ^ (a >> 16)) & 0x1f00000000ffffULL;
  a = (a ^ (a >> 32)) & 0x1fffffULL;
  return static_cast<std::uint32_t>(a);
}

}  // namespace

std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  if (x >= kMortonAxisLimit || y >= kMortonAxisLimit || z >= kMortonAxisLimit) {
    throw std::out_of_range("morton_encode: coordinate (" + std::to_string(x) + ", " +
                            std::to_string(y) + ", " + std::to_string(z) +
                            ") exceeds the 21-bit axis budget");
  }
  return spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2);
}

std::array<std::uint32_t, 3> morton_decode(std::uint64_t code) {
  return {compact_bits(code), compact_bits(code >> 1), compact_bits(code >> 2)};
}

}  // namespace dnmap
