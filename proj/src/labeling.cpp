#include "surfrec/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "surfrec/errors.hpp"

namespace surfrec {

namespace {

/// Closest point to q on triangle (a, b, c) with barycentric coordinates
/// (standard region-walk formulation).
Vec3 closest_on_triangle(const Vec3& q, const Vec3& a, const Vec3& b,
                         const Vec3& c, double bary[3]) {
    Vec3 ab = b - a, ac = c - a, aq = q - a;
    double d1 = ab.dot(aq), d2 = ac.dot(aq);
    if (d1 <= 0.0 && d2 <= 0.0) {
        bary[0] = 1.0; bary[1] = 0.0; bary[2] = 0.0;
        return a;
    }
    Vec3 bq = q - b;
    double d3 = ab.dot(bq), d4 = ac.dot(bq);
    if (d3 >= 0.0 && d4 <= d3) {
        bary[0] = 0.0; bary[1] = 1.0; bary[2] = 0.0;
        return b;
    }
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        double t = d1 / (d1 - d3);
        bary[0] = 1.0 - t; bary[1] = t; bary[2] = 0.0;
        return a + ab * t;
    }
    Vec3 cq = q - c;
    double d5 = ab.dot(cq), d6 = ac.dot(cq);
    if (d6 >= 0.0 && d5 <= d6) {
        bary[0] = 0.0; bary[1] = 0.0; bary[2] = 1.0;
        return c;
    }
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        double t = d2 / (d2 - d6);
        bary[0] = 1.0 - t; bary[1] = 0.0; bary[2] = t;
        return a + ac * t;
    }
    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        bary[0] = 0.0; bary[1] = 1.0 - t; bary[2] = t;
        return b + (c - b) * t;
    }
    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    bary[0] = 1.0 - v - w; bary[1] = v; bary[2] = w;
    return a + ab * v + ac * w;
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

double corner_angle(const Vec3& at, const Vec3& p1, const Vec3& p2) {
    Vec3 e1 = (p1 - at).normalized(), e2 = (p2 - at).normalized();
    return std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
}

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

constexpr double kBaryEdgeTol = 1e-9;

}  // namespace

MeshDistanceQuery::MeshDistanceQuery(const TriangleMesh& mesh) : mesh_(mesh) {
    if (mesh.empty()) throw EmptyInput("mesh has no triangles");
    mesh.validate();

    const std::size_t faces = mesh.triangles.size();
    order_.resize(faces);
    centroids_.resize(faces);
    face_normals_.resize(faces);
    for (std::uint32_t f = 0; f < faces; ++f) {
        order_[f] = f;
        const auto& t = mesh.triangles[f];
        centroids_[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] +
                         mesh.vertices[t[2]]) / 3.0;
        face_normals_[f] = mesh.face_normal(f);
    }
    nodes_.reserve(2 * faces / 4 + 2);
    root_ = build(0, static_cast<std::uint32_t>(faces));

    // winding check + edge pseudo-normals: a repeated directed edge means
    // inconsistent winding (or a non-manifold fan), both rejected
    std::unordered_map<std::uint64_t, Vec3> edge_sum;
    std::unordered_map<std::uint64_t, int> directed_count;
    vertex_pseudo_normals_.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    for (std::uint32_t f = 0; f < faces; ++f) {
        const auto& t = mesh.triangles[f];
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
            std::uint64_t directed = (static_cast<std::uint64_t>(a) << 32) | b;
            if (++directed_count[directed] > 1)
                throw InconsistentWinding(
                    "directed edge " + std::to_string(a) + "->" + std::to_string(b) +
                    " appears in multiple faces");
            edge_sum[edge_key(a, b)] += face_normals_[f];
            vertex_pseudo_normals_[a] +=
                face_normals_[f] *
                corner_angle(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        }
    }
    edge_keys_.reserve(edge_sum.size());
    for (const auto& [k, v] : edge_sum) edge_keys_.push_back(k);
    std::sort(edge_keys_.begin(), edge_keys_.end());
    edge_pseudo_normals_.resize(edge_keys_.size());
    for (std::size_t i = 0; i < edge_keys_.size(); ++i)
        edge_pseudo_normals_[i] = edge_sum[edge_keys_[i]];
}

std::int32_t MeshDistanceQuery::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    for (std::uint32_t i = begin; i < end; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        node.bounds.expand(mesh_.vertices[t[0]]);
        node.bounds.expand(mesh_.vertices[t[1]]);
        node.bounds.expand(mesh_.vertices[t[2]]);
    }
    auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin > 4) {
        Box3 cb;
        for (std::uint32_t i = begin; i < end; ++i) cb.expand(centroids_[order_[i]]);
        int axis = 0;
        cb.longest_extent(&axis);
        if (cb.extent()[axis] > 0.0) {
            std::uint32_t mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid,
                             order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 if (centroids_[a][axis] != centroids_[b][axis])
                                     return centroids_[a][axis] < centroids_[b][axis];
                                 return a < b;
                             });
            std::int32_t l = build(begin, mid);
            std::int32_t r = build(mid, end);
            nodes_[id].left = l;
            nodes_[id].right = r;
        }
    }
    return id;
}

void MeshDistanceQuery::closest_rec(std::int32_t id, const Vec3& q,
                                    ClosestPointResult& best) const {
    const Node& node = nodes_[id];
    if (box_sq_dist(node.bounds, q) >= best.sq_dist) return;
    if (node.leaf()) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            std::uint32_t f = order_[i];
            const auto& t = mesh_.triangles[f];
            double bary[3];
            Vec3 c = closest_on_triangle(q, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                         mesh_.vertices[t[2]], bary);
            double d2 = (q - c).squared_norm();
            if (d2 < best.sq_dist ||
                (d2 == best.sq_dist && f < best.triangle)) {
                best.sq_dist = d2;
                best.point = c;
                best.triangle = f;
                best.bary[0] = bary[0];
                best.bary[1] = bary[1];
                best.bary[2] = bary[2];
            }
        }
        return;
    }
    double dl = box_sq_dist(nodes_[node.left].bounds, q);
    double dr = box_sq_dist(nodes_[node.right].bounds, q);
    if (dl <= dr) {
        closest_rec(node.left, q, best);
        closest_rec(node.right, q, best);
    } else {
        closest_rec(node.right, q, best);
        closest_rec(node.left, q, best);
    }
}

ClosestPointResult MeshDistanceQuery::closest_point(const Vec3& q) const {
    ClosestPointResult best;
    best.sq_dist = std::numeric_limits<double>::infinity();
    best.triangle = std::numeric_limits<std::uint32_t>::max();
    closest_rec(root_, q, best);
    return best;
}

int MeshDistanceQuery::side(const Vec3& q, double* dot_out) const {
    ClosestPointResult cp = closest_point(q);
    const auto& t = mesh_.triangles[cp.triangle];

    int zero_count = 0, zero_at = -1;
    for (int k = 0; k < 3; ++k)
        if (cp.bary[k] <= kBaryEdgeTol) {
            ++zero_count;
            zero_at = k;
        }

    Vec3 normal;
    if (zero_count == 0) {
        normal = face_normals_[cp.triangle];
    } else if (zero_count == 1) {
        // on the edge opposite to corner zero_at
        std::uint32_t a = t[(zero_at + 1) % 3], b = t[(zero_at + 2) % 3];
        auto it = std::lower_bound(edge_keys_.begin(), edge_keys_.end(), edge_key(a, b));
        normal = edge_pseudo_normals_[static_cast<std::size_t>(it - edge_keys_.begin())];
    } else {
        // at the corner with the largest barycentric weight
        int corner = 0;
        for (int k = 1; k < 3; ++k)
            if (cp.bary[k] > cp.bary[corner]) corner = k;
        normal = vertex_pseudo_normals_[t[corner]];
    }

    double d = (q - cp.point).dot(normal);
    if (dot_out) *dot_out = d;
    return d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
}

LabelSet label_from_mesh(const VertexSet& vertices, const TriangleMesh& mesh) {
    MeshDistanceQuery query(mesh);
    LabelSet out;
    out.labels.resize(vertices.size());
    out.confidence.assign(vertices.size(), 1.0);
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        int s = query.side(vertices.coordinates[v]);
        // exact-zero sidedness ties label front with zero confidence
        out.labels[v] = s >= 0 ? 1 : 0;
        if (s == 0) out.confidence[v] = 0.0;
    }
    return out;
}

LabelSet baseline_classify(const VertexSet& vertices,
                           const OrientedPointCloud& cloud, double radius,
                           const SpatialIndex& index) {
    if (cloud.empty()) throw EmptyCloud("baseline classifier needs a point cloud");
    if (radius <= 0.0) throw Error("baseline radius must be positive");

    LabelSet out;
    out.labels.resize(vertices.size());
    out.confidence.assign(vertices.size(), 1.0);
    const double inv_sigma_sq = 1.0 / ((radius / 2.0) * (radius / 2.0));

    std::vector<std::uint32_t> hits;
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        const Vec3& q = vertices.coordinates[v];
        index.radius_query(q, radius, hits);
        double s = 0.0;
        if (hits.empty()) {
            std::uint32_t n = index.nearest(q);
            s = (q - cloud.positions[n]).dot(cloud.normals[n]);
        } else {
            for (std::uint32_t i : hits) {
                Vec3 d = q - cloud.positions[i];
                s += std::exp(-d.squared_norm() * inv_sigma_sq) *
                     d.dot(cloud.normals[i]);
            }
        }
        out.labels[v] = s >= 0.0 ? 1 : 0;
        if (s == 0.0) out.confidence[v] = 0.0;
    }
    return out;
}

LabelSet baseline_classify(const VertexSet& vertices,
                           const OrientedPointCloud& cloud, double radius) {
    SpatialIndex index(cloud.positions);
    return baseline_classify(vertices, cloud, radius, index);
}

namespace {
constexpr char kLabelMagic[4] = {'S', 'R', 'L', 'B'};
constexpr std::uint32_t kLabelVersion = 1;
}  // namespace

void save_labels(const LabelSet& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.write(kLabelMagic, 4);
    out.write(reinterpret_cast<const char*>(&kLabelVersion), 4);
    std::uint64_t count = labels.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    auto prov_len = static_cast<std::uint32_t>(labels.provenance.size());
    out.write(reinterpret_cast<const char*>(&prov_len), 4);
    out.write(labels.provenance.data(), prov_len);
    out.write(reinterpret_cast<const char*>(labels.labels.data()),
              static_cast<std::streamsize>(labels.labels.size()));
    if (!out) throw IoFailure("write failed for " + path);
}

LabelSet load_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kLabelMagic, 4) != 0)
        throw MalformedFile(path + ": bad label file magic");
    std::uint32_t version;
    if (!in.read(reinterpret_cast<char*>(&version), 4) || version != kLabelVersion)
        throw VersionMismatch(path + ": unsupported label file version");
    std::uint64_t count;
    if (!in.read(reinterpret_cast<char*>(&count), 8))
        throw MalformedFile(path + ": truncated label header");
    std::uint32_t prov_len;
    if (!in.read(reinterpret_cast<char*>(&prov_len), 4))
        throw MalformedFile(path + ": truncated label header");
    LabelSet out;
    out.provenance.resize(prov_len);
    if (prov_len && !in.read(out.provenance.data(), prov_len))
        throw MalformedFile(path + ": truncated provenance");
    out.labels.resize(count);
    if (!in.read(reinterpret_cast<char*>(out.labels.data()),
                 static_cast<std::streamsize>(count)))
        throw MalformedFile(path + ": truncated label payload");
    for (std::uint8_t l : out.labels)
        if (l > 1) throw MalformedFile(path + ": label value out of range");
    return out;
}

}  // namespace surfrec
