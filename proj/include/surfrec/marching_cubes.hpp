#ifndef SURFREC_MARCHING_CUBES_HPP
#define SURFREC_MARCHING_CUBES_HPP

#include "surfrec/labeling.hpp"
#include "surfrec/octree.hpp"
#include "surfrec/point_cloud.hpp"

namespace surfrec {

struct LabeledGrid {
    const Octree& octree;
    const VertexSet& vertices;
    const LabelSet& labels;
};

/// Marching cubes over the finest octree cells using labels as the
/// inside/outside predicate. Intersection vertices sit at exact edge
/// midpoints, deduplicated across cells by a canonical integer edge code.
/// Winding is oriented so face normals point from back-labeled (0) toward
/// front-labeled (1) corners.
TriangleMesh marching_cubes(const LabeledGrid& grid);

/// Alternating shrink (lambda > 0) / inflate (mu < 0) umbrella-operator
/// steps with uniform weights. Connectivity is unchanged; iterations = 0 is
/// the identity.
TriangleMesh taubin_smooth(const TriangleMesh& mesh, double lambda, double mu,
                           int iterations);

}  // namespace surfrec

#endif
