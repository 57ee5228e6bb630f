#include "surfrec/point_cloud.hpp"

#include <cmath>
#include <string>

#include "surfrec/errors.hpp"

namespace surfrec {

void OrientedPointCloud::validate_and_renormalize() {
    if (positions.size() != normals.size())
        throw MalformedFile("point/normal count mismatch: " +
                            std::to_string(positions.size()) + " vs " +
                            std::to_string(normals.size()));
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!positions[i].finite())
            throw MalformedFile("non-finite position at record " + std::to_string(i));
        if (!normals[i].finite())
            throw MalformedFile("non-finite normal at record " + std::to_string(i));
        double n = normals[i].norm();
        if (n <= 0.0)
            throw MissingNormals("zero-length normal at record " + std::to_string(i));
        normals[i] = normals[i] / n;
    }
}

void TriangleMesh::validate() const {
    for (std::size_t f = 0; f < triangles.size(); ++f) {
        const auto& t = triangles[f];
        for (int k = 0; k < 3; ++k)
            if (t[k] >= vertices.size())
                throw MalformedFile("triangle " + std::to_string(f) +
                                    " references vertex " + std::to_string(t[k]) +
                                    " out of " + std::to_string(vertices.size()));
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw MalformedFile("degenerate triangle " + std::to_string(f));
    }
}

NormalizationTransform normalize_cloud(OrientedPointCloud& cloud, double padding) {
    if (cloud.empty()) throw DegenerateExtent("empty cloud");
    Box3 box = cloud.bounding_box();
    double longest = box.longest_extent();
    if (longest <= 0.0) throw DegenerateExtent("all points coincide");

    NormalizationTransform t;
    t.scale = (1.0 - 2.0 * padding) / longest;
    // center each axis inside [padding, 1-padding]
    Vec3 center = (box.lo + box.hi) * 0.5;
    t.offset = Vec3{0.5, 0.5, 0.5} - center * t.scale;
    for (Vec3& p : cloud.positions) p = t.apply(p);
    return t;
}

void apply_transform(TriangleMesh& mesh, const NormalizationTransform& t) {
    for (Vec3& v : mesh.vertices) v = t.apply(v);
}

void apply_inverse_transform(TriangleMesh& mesh, const NormalizationTransform& t) {
    for (Vec3& v : mesh.vertices) v = t.invert(v);
}

}  // namespace surfrec
