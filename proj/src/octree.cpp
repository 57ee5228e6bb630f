#include "surfrec/octree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "surfrec/errors.hpp"

namespace surfrec {

namespace {
std::uint64_t spread_bits(std::uint64_t v) {
    v &= 0x1fffff;  // 21 bits
    v = (v | (v << 32)) & 0x1f00000000ffffULL;
    v = (v | (v << 16)) & 0x1f0000ff0000ffULL;
    v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
    v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
    v = (v | (v << 2)) & 0x1249249249249249ULL;
    return v;
}
std::uint32_t compact_bits(std::uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v | (v >> 2)) & 0x10c30c30c30c30c3ULL;
    v = (v | (v >> 4)) & 0x100f00f00f00f00fULL;
    v = (v | (v >> 8)) & 0x1f0000ff0000ffULL;
    v = (v | (v >> 16)) & 0x1f00000000ffffULL;
    v = (v | (v >> 32)) & 0x1fffff;
    return static_cast<std::uint32_t>(v);
}
}  // namespace

std::uint64_t morton_encode(std::uint32_t i, std::uint32_t j, std::uint32_t k) {
    return spread_bits(i) | (spread_bits(j) << 1) | (spread_bits(k) << 2);
}

std::array<std::uint32_t, 3> morton_decode(std::uint64_t code) {
    return {compact_bits(code), compact_bits(code >> 1), compact_bits(code >> 2)};
}

Octree build_octree(const OrientedPointCloud& cloud, int depth) {
    if (depth < 1 || depth > 12)
        throw DepthOutOfRange("octree depth must be in [1,12], got " +
                              std::to_string(depth));
    const std::uint32_t res = 1u << depth;
    const double scale = static_cast<double>(res);

    std::unordered_set<std::uint64_t> occupied;
    occupied.reserve(cloud.size());
    for (const Vec3& p : cloud.positions) {
        auto cell = [&](double x) {
            double c = std::floor(x * scale);
            if (c < 0.0) c = 0.0;
            if (c >= scale) c = scale - 1.0;  // points exactly at 1.0
            return static_cast<std::uint32_t>(c);
        };
        occupied.insert(morton_encode(cell(p.x), cell(p.y), cell(p.z)));
    }

    // one-ring dilation, clipped at the cube boundary
    std::unordered_set<std::uint64_t> dilated;
    dilated.reserve(occupied.size() * 8);
    for (std::uint64_t code : occupied) {
        auto c = morton_decode(code);
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    std::int64_t i = static_cast<std::int64_t>(c[0]) + di;
                    std::int64_t j = static_cast<std::int64_t>(c[1]) + dj;
                    std::int64_t k = static_cast<std::int64_t>(c[2]) + dk;
                    if (i < 0 || j < 0 || k < 0 || i >= res || j >= res || k >= res)
                        continue;
                    dilated.insert(morton_encode(static_cast<std::uint32_t>(i),
                                                 static_cast<std::uint32_t>(j),
                                                 static_cast<std::uint32_t>(k)));
                }
    }

    std::vector<std::uint64_t> sorted(dilated.begin(), dilated.end());
    std::sort(sorted.begin(), sorted.end());

    Octree tree;
    tree.depth = depth;
    tree.finest_cells.reserve(sorted.size());
    for (std::uint64_t code : sorted) tree.finest_cells.push_back(morton_decode(code));
    return tree;
}

VertexSet extract_finest_vertices(const Octree& octree) {
    VertexSet vs;
    vs.depth = octree.depth;
    const double edge = octree.cell_edge();

    std::vector<std::uint64_t> corner_codes;
    corner_codes.reserve(octree.cell_count() * 8);
    for (const auto& cell : octree.finest_cells)
        for (const auto& off : kCornerOffsets)
            corner_codes.push_back(morton_encode(cell[0] + off[0], cell[1] + off[1],
                                                 cell[2] + off[2]));
    std::sort(corner_codes.begin(), corner_codes.end());
    corner_codes.erase(std::unique(corner_codes.begin(), corner_codes.end()),
                       corner_codes.end());

    vs.codes = std::move(corner_codes);
    vs.coordinates.reserve(vs.codes.size());
    vs.lattice.reserve(vs.codes.size());
    std::unordered_map<std::uint64_t, std::uint32_t> index_of;
    index_of.reserve(vs.codes.size() * 2);
    for (std::uint32_t i = 0; i < vs.codes.size(); ++i) {
        auto c = morton_decode(vs.codes[i]);
        vs.lattice.push_back(c);
        vs.coordinates.push_back({c[0] * edge, c[1] * edge, c[2] * edge});
        index_of.emplace(vs.codes[i], i);
    }

    vs.cell_corners.reserve(octree.cell_count());
    for (const auto& cell : octree.finest_cells) {
        std::array<std::uint32_t, 8> corners{};
        for (int k = 0; k < 8; ++k)
            corners[k] = index_of.at(morton_encode(cell[0] + kCornerOffsets[k][0],
                                                   cell[1] + kCornerOffsets[k][1],
                                                   cell[2] + kCornerOffsets[k][2]));
        vs.cell_corners.push_back(corners);
    }
    return vs;
}

void dump_cells(const Octree& octree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    for (const auto& c : octree.finest_cells)
        out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

}  // namespace surfrec
