#ifndef SURFREC_KDTREE_HPP
#define SURFREC_KDTREE_HPP

#include <cstdint>
#include <vector>

#include "surfrec/vec3.hpp"

namespace surfrec {

/// Median-split kd-tree over a fixed position list. Immutable after
/// construction; queries are const and safe to run concurrently.
/// radius_query returns indices sorted ascending so downstream
/// accumulation order never depends on tree layout.
class SpatialIndex {
public:
    SpatialIndex() = default;
    explicit SpatialIndex(const std::vector<Vec3>& positions);

    std::size_t size() const { return points_.size(); }

    /// All indices i with |positions[i] - q| <= r, sorted ascending.
    std::vector<std::uint32_t> radius_query(const Vec3& q, double radius) const;
    void radius_query(const Vec3& q, double radius,
                      std::vector<std::uint32_t>& out) const;

    /// Index of the closest point; ties broken toward the smallest index.
    /// Returns uint32 max on an empty index.
    std::uint32_t nearest(const Vec3& q, double* sq_dist_out = nullptr) const;

    const Vec3& position(std::uint32_t i) const { return points_[i]; }

private:
    struct Node {
        Box3 bounds;
        std::uint32_t begin = 0, end = 0;  // leaf range in order_
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;
        double split = 0.0;
        bool leaf() const { return left < 0; }
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void radius_rec(std::int32_t node, const Vec3& q, double r2,
                    std::vector<std::uint32_t>& out) const;
    void nearest_rec(std::int32_t node, const Vec3& q, double& best_d2,
                     std::uint32_t& best_i) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;

    static constexpr std::uint32_t kLeafSize = 16;
};

}  // namespace surfrec

#endif
