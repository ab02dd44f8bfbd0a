#pragma once

#include <array>
#include <cstdint>

namespace dnmap::detail {

// Cube vertex v sits at the corner numbered in the classic layout: 0..3 on
// the bottom face (z = 0) counter-clockwise from the origin, 4..7 above them.
extern const std::array<std::uint16_t, 256> kMcEdgeTable;
// Up to five triangles per case as edge-index triples, terminated by -1.
extern const std::array<std::array<std::int8_t, 16>, 256> kMcTriTable;

}  // namespace dnmap::detail
