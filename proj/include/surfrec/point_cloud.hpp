#ifndef SURFREC_POINT_CLOUD_HPP
#define SURFREC_POINT_CLOUD_HPP

#include <cstdint>
#include <vector>

#include "surfrec/vec3.hpp"

namespace surfrec {

/// Oriented point cloud: positions with unit normals, one per position.
struct OrientedPointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    Box3 bounding_box() const {
        Box3 b;
        for (const Vec3& p : positions) b.expand(p);
        return b;
    }

    /// Renormalizes all normals to unit length and checks invariants.
    /// Throws MissingNormals on a zero-length normal, MalformedFile on
    /// non-finite coordinates or a count mismatch.
    void validate_and_renormalize();
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    bool empty() const { return triangles.empty(); }

    Vec3 face_normal(std::size_t f) const {
        const auto& t = triangles[f];
        return (vertices[t[1]] - vertices[t[0]])
            .cross(vertices[t[2]] - vertices[t[0]])
            .normalized();
    }
    double face_area(std::size_t f) const {
        const auto& t = triangles[f];
        return 0.5 * (vertices[t[1]] - vertices[t[0]])
                         .cross(vertices[t[2]] - vertices[t[0]])
                         .norm();
    }

    /// Index bounds and degeneracy checks; throws MalformedFile.
    void validate() const;
};

/// Uniform scale + offset: world -> normalized maps p to p * scale + offset.
struct NormalizationTransform {
    double scale = 1.0;
    Vec3 offset{0.0, 0.0, 0.0};

    Vec3 apply(const Vec3& p) const { return p * scale + offset; }
    Vec3 invert(const Vec3& p) const { return (p - offset) / scale; }
};

/// Maps the cloud's tight bounding box into [padding, 1-padding]^3 with a
/// single uniform scale (longest axis governs). Normals are unchanged.
/// Throws DegenerateExtent when all points coincide.
NormalizationTransform normalize_cloud(OrientedPointCloud& cloud, double padding);

/// Same transform applied to mesh vertices (for ground-truth surfaces).
void apply_transform(TriangleMesh& mesh, const NormalizationTransform& t);
void apply_inverse_transform(TriangleMesh& mesh, const NormalizationTransform& t);

}  // namespace surfrec

#endif
