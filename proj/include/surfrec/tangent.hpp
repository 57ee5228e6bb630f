#ifndef SURFREC_TANGENT_HPP
#define SURFREC_TANGENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "surfrec/kdtree.hpp"
#include "surfrec/vec3.hpp"

namespace surfrec {

/// Orientation-corrected tangent frame: {u, v, normal} orthonormal and
/// right-handed, with normal chosen as the smallest-eigenvalue direction of
/// the neighbor covariance, sign-fixed so normal . n_a > 0 where n_a is the
/// average input normal of the neighbors used.
struct TangentFrame {
    Vec3 origin;
    Vec3 normal{0.0, 0.0, 1.0};
    Vec3 u{1.0, 0.0, 0.0};
    Vec3 v{0.0, 1.0, 0.0};
    Vec3 average_normal{0.0, 0.0, 0.0};
    bool degenerate = false;  // covariance rank < 2; normal fell back to n_a
};

/// Eigenvalues ascending with matching unit eigenvectors, closed-form
/// symmetric 3x3 solve. `m` is row-major symmetric.
void symmetric_eigen3(const double m[3][3], double eigenvalues[3],
                      Vec3 eigenvectors[3]);

/// Covariance analysis over the given neighbors. Throws TooFewNeighbors
/// below 3 neighbors. Rank deficiency falls back to the average input
/// normal with the degenerate flag set.
TangentFrame estimate_frame(const Vec3& query,
                            const std::vector<Vec3>& neighbor_positions,
                            const std::vector<Vec3>& neighbor_normals);

/// Frames for a batch of query locations; neighbors come from the cloud's
/// spatial index within `radius`. Queries with fewer than 3 neighbors get a
/// degenerate frame (normal = n_a, or +z when no neighbors at all).
std::vector<TangentFrame> estimate_frames(const std::vector<Vec3>& queries,
                                          const SpatialIndex& index,
                                          const std::vector<Vec3>& positions,
                                          const std::vector<Vec3>& normals,
                                          double radius);

/// Precomputed tangent-image gather: for each (location, pixel), the source
/// indices projected into that pixel with equal weights summing to 1.
/// Empty (sentinel) pixels have an empty entry range. CSR layout:
/// entries for (location q, pixel p) are
///   entries[pixel_offsets[q*l*l + p] .. pixel_offsets[q*l*l + p + 1]).
struct GatherTable {
    struct Entry {
        std::uint32_t source;
        double weight;
    };
    std::uint32_t extent = 3;  // l, odd
    double radius = 0.0;
    std::size_t num_locations = 0;
    std::vector<std::uint64_t> pixel_offsets;  // size num_locations*l*l + 1
    std::vector<Entry> entries;

    std::size_t pixels() const { return static_cast<std::size_t>(extent) * extent; }
};

/// Projects every source within `radius` of each query onto the frame's
/// (u,v) plane and bins it to the nearest pixel of an l x l image spanning
/// [-radius, radius]^2. Multiple sources in one pixel share equal weights.
/// Sources are visited in ascending index order, so the table (and every
/// accumulation driven by it) is deterministic.
GatherTable precompute_gather(const std::vector<Vec3>& queries,
                              const std::vector<TangentFrame>& frames,
                              const SpatialIndex& index, double radius,
                              std::uint32_t extent);

/// Input signal images: channel 0 = signed distance to the tangent plane,
/// channels 1..3 = neighbor normal in frame coordinates (u, v, normal).
struct SignalImage {
    std::uint32_t extent = 3;
    std::uint32_t channels = 4;
    std::size_t num_locations = 0;
    std::vector<double> data;  // [location][pixel][channel]
};

SignalImage compute_signals(const GatherTable& table,
                            const std::vector<TangentFrame>& frames,
                            const std::vector<Vec3>& source_positions,
                            const std::vector<Vec3>& source_normals);

/// One grid-hash level: representative positions (per-cell centroids of the
/// previous level) and the fine -> coarse membership map.
struct PyramidLevel {
    std::vector<Vec3> positions;
    std::vector<std::uint32_t> pool_from_prev;  // size = previous level count
};

/// Multiscale grid-hash pyramid. Point levels hash at cell sizes
/// 1/2^(D+2), 1/2^(D+1), 1/2^D (level 0 = the raw input points).
/// Vertex level 1 is the identity over the vertex lattice; levels 2 and 3
/// hash at 1/2^(D-1) and 1/2^(D-2).
struct ScalePyramid {
    int depth = 0;
    std::vector<PyramidLevel> point_levels;   // 3 levels above the raw points
    std::vector<PyramidLevel> vertex_levels;  // levels 2 and 3 above vertices

    double point_cell_size(int scale) const;   // scale in {1,2,3}
    double vertex_cell_size(int scale) const;  // scale 1 reports the lattice pitch
};

/// `vertex_lattice` carries integer lattice coordinates at depth D so vertex
/// cell membership is exact. Throws DepthTooShallow for D < 3.
ScalePyramid build_pyramid(const std::vector<Vec3>& point_positions,
                           const std::vector<Vec3>& vertex_positions,
                           const std::vector<std::array<std::uint32_t, 3>>& vertex_lattice,
                           int depth);

/// Versioned binary cache of a gather table (little-endian, fixed-width
/// records). Roundtrip is bit-exact.
void save_gather_table(const GatherTable& table, const std::string& path);
GatherTable load_gather_table(const std::string& path);

}  // namespace surfrec

#endif
