#include "surfrec/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace surfrec {

SpatialIndex::SpatialIndex(const std::vector<Vec3>& positions)
    : points_(positions) {
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        root_ = build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    for (std::uint32_t i = begin; i < end; ++i) node.bounds.expand(points_[order_[i]]);

    std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);

    if (end - begin > kLeafSize) {
        int axis = 0;
        nodes_[id].bounds.longest_extent(&axis);
        std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid,
                         order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             if (points_[a][axis] != points_[b][axis])
                                 return points_[a][axis] < points_[b][axis];
                             return a < b;
                         });
        // degenerate (zero-extent) ranges stay a leaf
        if (nodes_[id].bounds.lo[axis] < nodes_[id].bounds.hi[axis]) {
            nodes_[id].axis = static_cast<std::uint8_t>(axis);
            nodes_[id].split = points_[order_[mid]][axis];
            std::int32_t l = build(begin, mid);
            std::int32_t r = build(mid, end);
            nodes_[id].left = l;
            nodes_[id].right = r;
        }
    }
    return id;
}

void SpatialIndex::radius_query(const Vec3& q, double radius,
                                std::vector<std::uint32_t>& out) const {
    out.clear();
    if (root_ < 0 || radius < 0.0) return;
    radius_rec(root_, q, radius * radius, out);
    std::sort(out.begin(), out.end());
}

std::vector<std::uint32_t> SpatialIndex::radius_query(const Vec3& q,
                                                      double radius) const {
    std::vector<std::uint32_t> out;
    radius_query(q, radius, out);
    return out;
}

namespace {
double box_sq_dist(const Box3& b, const Vec3& q) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        if (q[a] < b.lo[a]) d = b.lo[a] - q[a];
        else if (q[a] > b.hi[a]) d = q[a] - b.hi[a];
        d2 += d * d;
    }
    return d2;
}
}  // namespace

void SpatialIndex::radius_rec(std::int32_t id, const Vec3& q, double r2,
                              std::vector<std::uint32_t>& out) const {
    const Node& node = nodes_[id];
    if (box_sq_dist(node.bounds, q) > r2) return;
    if (node.leaf()) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            std::uint32_t p = order_[i];
            if ((points_[p] - q).squared_norm() <= r2) out.push_back(p);
        }
        return;
    }
    radius_rec(node.left, q, r2, out);
    radius_rec(node.right, q, r2, out);
}

std::uint32_t SpatialIndex::nearest(const Vec3& q, double* sq_dist_out) const {
    std::uint32_t best_i = std::numeric_limits<std::uint32_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    if (root_ >= 0) nearest_rec(root_, q, best_d2, best_i);
    if (sq_dist_out) *sq_dist_out = best_d2;
    return best_i;
}

void SpatialIndex::nearest_rec(std::int32_t id, const Vec3& q, double& best_d2,
                               std::uint32_t& best_i) const {
    const Node& node = nodes_[id];
    if (box_sq_dist(node.bounds, q) > best_d2) return;
    if (node.leaf()) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            std::uint32_t p = order_[i];
            double d2 = (points_[p] - q).squared_norm();
            if (d2 < best_d2 || (d2 == best_d2 && p < best_i)) {
                best_d2 = d2;
                best_i = p;
            }
        }
        return;
    }
    // visit nearer child first
    std::int32_t first = node.left, second = node.right;
    if (q[node.axis] >= node.split) std::swap(first, second);
    nearest_rec(first, q, best_d2, best_i);
    nearest_rec(second, q, best_d2, best_i);
}

}  // namespace surfrec
