#ifndef SURFREC_LABELING_HPP
#define SURFREC_LABELING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "surfrec/kdtree.hpp"
#include "surfrec/octree.hpp"
#include "surfrec/point_cloud.hpp"

namespace surfrec {

/// Per-vertex front/back labels: 0 = back/inside, 1 = front/outside.
struct LabelSet {
    std::vector<std::uint8_t> labels;
    std::vector<double> confidence;  // optional, empty or labels.size()
    std::string provenance;          // free-form, persisted with the labels

    std::size_t size() const { return labels.size(); }
};

/// Closest point on a triangle mesh, with enough context to evaluate the
/// angle-weighted pseudo-normal at faces, edges, and vertices.
struct ClosestPointResult {
    Vec3 point;
    std::uint32_t triangle = 0;
    double bary[3] = {0.0, 0.0, 0.0};
    double sq_dist = 0.0;
};

/// Bounding-volume hierarchy over triangles; immutable, concurrent reads.
class MeshDistanceQuery {
public:
    explicit MeshDistanceQuery(const TriangleMesh& mesh);

    ClosestPointResult closest_point(const Vec3& q) const;

    /// Signed side of q: +1 front (outward-normal side), -1 back, 0 on the
    /// surface, decided by the angle-weighted pseudo-normal at the closest
    /// point. `dot_out` reports the pseudo-normal dot used.
    int side(const Vec3& q, double* dot_out = nullptr) const;

private:
    struct Node {
        Box3 bounds;
        std::uint32_t begin = 0, end = 0;
        std::int32_t left = -1, right = -1;
        bool leaf() const { return left < 0; }
    };
    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void closest_rec(std::int32_t node, const Vec3& q, ClosestPointResult& best) const;

    const TriangleMesh& mesh_;
    std::vector<std::uint32_t> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
    std::vector<Vec3> face_normals_;
    // pseudo-normals precomputed per vertex and per undirected edge
    std::vector<Vec3> vertex_pseudo_normals_;
    std::vector<std::uint64_t> edge_keys_;     // sorted
    std::vector<Vec3> edge_pseudo_normals_;    // aligned with edge_keys_
};

/// Ground-truth labels from a consistently wound reference mesh.
/// Exact-zero sidedness ties label 1 with confidence 0.
/// Throws InconsistentWinding when a directed edge repeats.
LabelSet label_from_mesh(const VertexSet& vertices, const TriangleMesh& mesh);

/// Non-learned classifier: Gaussian-weighted signed projection distances to
/// neighbor tangent planes; no-neighbor vertices fall back to the nearest
/// single point. Throws EmptyCloud.
LabelSet baseline_classify(const VertexSet& vertices,
                           const OrientedPointCloud& cloud, double radius);
LabelSet baseline_classify(const VertexSet& vertices,
                           const OrientedPointCloud& cloud, double radius,
                           const SpatialIndex& index);

/// Flat binary label file: magic, version, count, one byte per label.
void save_labels(const LabelSet& labels, const std::string& path);
LabelSet load_labels(const std::string& path);

}  // namespace surfrec

#endif
