#ifndef SURFREC_METRICS_HPP
#define SURFREC_METRICS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "surfrec/labeling.hpp"
#include "surfrec/point_cloud.hpp"

namespace surfrec {

/// Area-uniform samples from a mesh, each carrying its face normal.
struct SampledSurface {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;

    std::size_t size() const { return points.size(); }
};

/// Fraction of exactly matching labels. Throws LengthMismatch.
double vertex_accuracy(const LabelSet& pred, const LabelSet& truth);

/// 0.5 * (mean NN distance a->b + mean NN distance b->a). Throws EmptyInput.
double chamfer_l1(const SampledSurface& a, const SampledSurface& b);

struct ChamferSq {
    double mean = 0.0;
    double rms = 0.0;
};

/// Squared nearest distances, both directions pooled into one population.
ChamferSq chamfer_sq(const SampledSurface& a, const SampledSurface& b);

/// Symmetric mean of |n . n_nearest| over both directions; orientation flips
/// of either argument do not change the score.
double normal_consistency(const SampledSurface& a, const SampledSurface& b);

/// Intersection over union of the inside (label 0) vertex sets; a proxy for
/// volumetric IoU at grid-vertex granularity. When neither set has inside
/// vertices returns 1 and sets *both_empty. Throws LengthMismatch.
double label_iou(const LabelSet& pred, const LabelSet& truth,
                 bool* both_empty = nullptr);

/// Triangles chosen with probability proportional to area,
/// barycentric-uniform inside each; deterministic per seed.
/// Throws EmptyInput on an empty mesh, ZeroArea if all triangles degenerate.
SampledSurface sample_mesh(const TriangleMesh& mesh, std::size_t n,
                           std::uint64_t seed);

/// Flat metric report (name -> value plus string provenance fields),
/// serialized as a small JSON object with stable key order.
struct MetricsReport {
    std::map<std::string, double> values;
    std::map<std::string, std::string> provenance;

    std::string to_json() const;
};

}  // namespace surfrec

#endif
