#include "surfrec/analytic.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "surfrec/errors.hpp"

namespace surfrec {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

void add_noise(OrientedPointCloud& cloud, std::mt19937_64& rng, double sigma) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> g(0.0, sigma);
    for (Vec3& p : cloud.positions) {
        p.x += g(rng);
        p.y += g(rng);
        p.z += g(rng);
    }
}

}  // namespace

OrientedPointCloud sample_sphere_cloud(const Vec3& center, double radius,
                                       std::size_t n, std::uint64_t seed,
                                       double sigma) {
    if (radius <= 0.0) throw ConfigError("sphere radius must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    OrientedPointCloud cloud;
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 d{g(rng), g(rng), g(rng)};
        while (d.norm() < 1e-12) d = Vec3{g(rng), g(rng), g(rng)};
        d = d.normalized();
        cloud.positions.push_back(center + d * radius);
        cloud.normals.push_back(d);
    }
    add_noise(cloud, rng, sigma);
    return cloud;
}

OrientedPointCloud sample_torus_cloud(const Vec3& center, double major,
                                      double minor, std::size_t n,
                                      std::uint64_t seed, double sigma) {
    if (minor <= 0.0 || major <= minor)
        throw ConfigError("torus needs major > minor > 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    OrientedPointCloud cloud;
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    while (cloud.positions.size() < n) {
        double theta = uni(rng) * kTau;  // around the tube center circle
        double phi = uni(rng) * kTau;    // around the tube
        // surface element ~ (major + minor*cos(phi)); rejection keeps it uniform
        double accept = (major + minor * std::cos(phi)) / (major + minor);
        if (uni(rng) > accept) continue;
        Vec3 ring{std::cos(theta), std::sin(theta), 0.0};
        Vec3 normal = ring * std::cos(phi) + Vec3{0.0, 0.0, 1.0} * std::sin(phi);
        cloud.positions.push_back(center + ring * major + normal * minor);
        cloud.normals.push_back(normal);
    }
    add_noise(cloud, rng, sigma);
    return cloud;
}

OrientedPointCloud sample_plane_cloud(const Vec3& center, double half_extent,
                                      std::size_t n, std::uint64_t seed,
                                      double sigma) {
    if (half_extent <= 0.0) throw ConfigError("plane half_extent must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-half_extent, half_extent);
    OrientedPointCloud cloud;
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.positions.push_back({center.x + uni(rng), center.y + uni(rng), center.z});
        cloud.normals.push_back({0.0, 0.0, 1.0});
    }
    add_noise(cloud, rng, sigma);
    return cloud;
}

double sphere_sdf(const Vec3& p, const Vec3& center, double radius) {
    return (p - center).norm() - radius;
}

double torus_sdf(const Vec3& p, const Vec3& center, double major, double minor) {
    Vec3 q = p - center;
    double ring = std::sqrt(q.x * q.x + q.y * q.y) - major;
    return std::sqrt(ring * ring + q.z * q.z) - minor;
}

double plane_sdf(const Vec3& p, double z) { return p.z - z; }

TriangleMesh icosphere_mesh(const Vec3& center, double radius, int subdivisions) {
    if (radius <= 0.0) throw ConfigError("sphere radius must be positive");
    if (subdivisions < 0 || subdivisions > 8)
        throw ConfigError("icosphere subdivisions must be in [0, 8]");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    mesh.triangles = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(mesh.triangles.size() * 4);
        for (const auto& f : mesh.triangles) {
            std::uint32_t a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        mesh.triangles = std::move(next);
    }
    for (Vec3& v : mesh.vertices) v = center + v.normalized() * radius;
    return mesh;
}

TriangleMesh torus_mesh(const Vec3& center, double major, double minor,
                        int major_segments, int minor_segments) {
    if (minor <= 0.0 || major <= minor)
        throw ConfigError("torus needs major > minor > 0");
    if (major_segments < 3 || minor_segments < 3)
        throw ConfigError("torus needs at least 3 segments per loop");
    TriangleMesh mesh;
    for (int i = 0; i < major_segments; ++i) {
        double theta = kTau * i / major_segments;
        Vec3 ring{std::cos(theta), std::sin(theta), 0.0};
        for (int j = 0; j < minor_segments; ++j) {
            double phi = kTau * j / minor_segments;
            Vec3 normal = ring * std::cos(phi) + Vec3{0.0, 0.0, 1.0} * std::sin(phi);
            mesh.vertices.push_back(center + ring * major + normal * minor);
        }
    }
    auto idx = [&](int i, int j) {
        return static_cast<std::uint32_t>((i % major_segments) * minor_segments +
                                          (j % minor_segments));
    };
    for (int i = 0; i < major_segments; ++i) {
        for (int j = 0; j < minor_segments; ++j) {
            std::uint32_t a = idx(i, j), b = idx(i + 1, j);
            std::uint32_t c = idx(i + 1, j + 1), d = idx(i, j + 1);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }
    return mesh;
}

TriangleMesh plane_mesh(const Vec3& center, double half_extent, int segments) {
    if (half_extent <= 0.0) throw ConfigError("plane half_extent must be positive");
    if (segments < 1) throw ConfigError("plane needs at least 1 segment");
    TriangleMesh mesh;
    int n = segments + 1;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double x = center.x - half_extent + 2.0 * half_extent * i / segments;
            double y = center.y - half_extent + 2.0 * half_extent * j / segments;
            mesh.vertices.push_back({x, y, center.z});
        }
    }
    auto idx = [&](int i, int j) { return static_cast<std::uint32_t>(j * n + i); };
    for (int j = 0; j < segments; ++j) {
        for (int i = 0; i < segments; ++i) {
            // counterclockwise seen from +z so face normals point up
            mesh.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
            mesh.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    return mesh;
}

LabelSet labels_from_sdf(const VertexSet& vertices,
                         const std::function<double(const Vec3&)>& sdf) {
    LabelSet out;
    out.labels.resize(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
        out.labels[i] = sdf(vertices.coordinates[i]) < 0.0 ? 0 : 1;
    return out;
}

}  // namespace surfrec
