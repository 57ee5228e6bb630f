#ifndef SURFREC_ANALYTIC_HPP
#define SURFREC_ANALYTIC_HPP

#include <cstdint>
#include <functional>

#include "surfrec/labeling.hpp"
#include "surfrec/octree.hpp"
#include "surfrec/point_cloud.hpp"

namespace surfrec {

/// Test-shape generators: clouds carry exact surface normals at the
/// noiseless sample; Gaussian position noise (sigma, iid per coordinate) is
/// applied afterwards. All are deterministic per seed.

OrientedPointCloud sample_sphere_cloud(const Vec3& center, double radius,
                                       std::size_t n, std::uint64_t seed,
                                       double sigma = 0.0);

/// Torus around the z axis through `center`; area-uniform via rejection on
/// the major-angle Jacobian.
OrientedPointCloud sample_torus_cloud(const Vec3& center, double major,
                                      double minor, std::size_t n,
                                      std::uint64_t seed, double sigma = 0.0);

/// Square patch z = center.z, |x|,|y| <= half_extent around center;
/// normals +z.
OrientedPointCloud sample_plane_cloud(const Vec3& center, double half_extent,
                                      std::size_t n, std::uint64_t seed,
                                      double sigma = 0.0);

/// Exact signed distances, negative inside (below, for the plane).
double sphere_sdf(const Vec3& p, const Vec3& center, double radius);
double torus_sdf(const Vec3& p, const Vec3& center, double major, double minor);
double plane_sdf(const Vec3& p, double z);

/// Reference meshes with outward (upward) consistent winding.
TriangleMesh icosphere_mesh(const Vec3& center, double radius, int subdivisions);
TriangleMesh torus_mesh(const Vec3& center, double major, double minor,
                        int major_segments, int minor_segments);
TriangleMesh plane_mesh(const Vec3& center, double half_extent, int segments);

/// Labels octree vertices by an SDF: 0 where sdf < 0 (back/inside), else 1.
LabelSet labels_from_sdf(const VertexSet& vertices,
                         const std::function<double(const Vec3&)>& sdf);

}  // namespace surfrec

#endif
