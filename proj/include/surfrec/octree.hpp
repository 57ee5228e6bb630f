#ifndef SURFREC_OCTREE_HPP
#define SURFREC_OCTREE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "surfrec/point_cloud.hpp"

namespace surfrec {

/// 3-interleaved (Morton) code of a finest-level cell or lattice vertex.
/// Supports coordinates up to 2^13, enough for depth 12 vertices (2^12+1).
std::uint64_t morton_encode(std::uint32_t i, std::uint32_t j, std::uint32_t k);
std::array<std::uint32_t, 3> morton_decode(std::uint64_t code);

/// Finest level of the adaptive octree over [0,1]^3: every cell containing a
/// point plus its full 3x3x3 neighborhood, clipped to the cube.
/// Cells are sorted by Morton code; immutable after construction.
struct Octree {
    int depth = 0;
    std::vector<std::array<std::uint32_t, 3>> finest_cells;

    std::uint32_t resolution() const { return 1u << depth; }
    double cell_edge() const { return 1.0 / static_cast<double>(1u << depth); }
    std::size_t cell_count() const { return finest_cells.size(); }
};

/// Canonical corner offsets, fixed so downstream cube tables are unambiguous:
/// (0,0,0),(1,0,0),(0,1,0),(1,1,0),(0,0,1),(1,0,1),(0,1,1),(1,1,1).
inline constexpr std::array<std::array<std::uint32_t, 3>, 8> kCornerOffsets = {{
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1},
}};

/// Deduplicated corner vertices of all finest cells, sorted by Morton code.
struct VertexSet {
    int depth = 0;
    std::vector<Vec3> coordinates;                     // exact lattice multiples of 1/2^D
    std::vector<std::array<std::uint32_t, 3>> lattice; // integer lattice coords
    std::vector<std::uint64_t> codes;                  // unique Morton keys, ascending
    std::vector<std::array<std::uint32_t, 8>> cell_corners;  // per finest cell

    std::size_t size() const { return coordinates.size(); }
};

/// Throws DepthOutOfRange unless 1 <= depth <= 12; requires positions in [0,1]^3.
Octree build_octree(const OrientedPointCloud& cloud, int depth);

VertexSet extract_finest_vertices(const Octree& octree);

/// Debug dump, one "i j k" line per cell, for differential testing.
void dump_cells(const Octree& octree, const std::string& path);

}  // namespace surfrec

#endif
