#ifndef SURFREC_PARTITION_HPP
#define SURFREC_PARTITION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "surfrec/octree.hpp"
#include "surfrec/point_cloud.hpp"

namespace surfrec {

struct PartitionConfig {
    std::size_t max_batch = 300000;
    /// Padding of the point box beyond the vertex box, normalized units.
    /// <= 0 selects default_partition_pad(depth).
    double pad = 0.0;
    /// Split until at least this many parts exist, independent of max_batch.
    std::uint32_t force_parts = 1;
};

/// Conservative bound on the classifier's total receptive field:
/// the per-scale gather radii 4/2^D * (1 + 2 + 4) plus the coarsest
/// vertex grid-hash cell diagonal sqrt(3)/2^(D-2). Border predictions are
/// exact whenever pad >= this value.
double default_partition_pad(int depth);

/// One partition. Vertex boxes are half-open and pairwise disjoint; the
/// point box is the vertex box padded and then aligned outward to the
/// finest point grid so grid-hash cells are never split. halo_vertex_indices
/// complete the coarse vertex-grid cells that owned vertices fall in, so the
/// per-part vertex pyramid is identical to the global one.
struct Part {
    std::uint32_t part_id = 0;
    Box3 vertex_box;
    Box3 point_box;
    std::vector<std::uint32_t> vertex_indices;       // owned, ascending
    std::vector<std::uint32_t> halo_vertex_indices;  // closure \ owned, ascending
    std::vector<std::uint32_t> point_indices;        // ascending
};

std::vector<Part> partition(const VertexSet& vertices,
                            const OrientedPointCloud& cloud,
                            const PartitionConfig& cfg);

/// Scatter per-part labels back to the global vertex order. Throws
/// CoverageGap when a vertex is owned by no part, LengthMismatch when a
/// label list does not match its part.
std::vector<std::uint8_t> merge_labels(
    const std::vector<Part>& parts,
    const std::vector<std::vector<std::uint8_t>>& per_part_labels,
    std::size_t vertex_count);

/// Audit dump: per part, its boxes and counts.
void dump_parts(const std::vector<Part>& parts, const std::string& path);

}  // namespace surfrec

#endif
