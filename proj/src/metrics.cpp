#include "surfrec/metrics.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "surfrec/errors.hpp"
#include "surfrec/kdtree.hpp"

namespace surfrec {

double vertex_accuracy(const LabelSet& pred, const LabelSet& truth) {
    if (pred.size() != truth.size())
        throw LengthMismatch("label sets differ: " + std::to_string(pred.size()) +
                             " vs " + std::to_string(truth.size()));
    if (pred.size() == 0) throw EmptyInput("empty label sets");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred.labels[i] == truth.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

void check_nonempty(const SampledSurface& a, const SampledSurface& b) {
    if (a.size() == 0 || b.size() == 0)
        throw EmptyInput("distance metrics need nonempty surfaces");
}

// nearest-neighbor indices from each point of `from` into `to`
std::vector<std::uint32_t> nn_indices(const SampledSurface& from,
                                      const SpatialIndex& to) {
    std::vector<std::uint32_t> nn(from.size());
    for (std::size_t i = 0; i < from.size(); ++i)
        nn[i] = to.nearest(from.points[i]);
    return nn;
}

}  // namespace

double chamfer_l1(const SampledSurface& a, const SampledSurface& b) {
    check_nonempty(a, b);
    SpatialIndex ia(a.points), ib(b.points);
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const Vec3& p : a.points) {
        double d2 = 0.0;
        ib.nearest(p, &d2);
        sum_ab += std::sqrt(d2);
    }
    for (const Vec3& p : b.points) {
        double d2 = 0.0;
        ia.nearest(p, &d2);
        sum_ba += std::sqrt(d2);
    }
    return 0.5 * (sum_ab / static_cast<double>(a.size()) +
                  sum_ba / static_cast<double>(b.size()));
}

ChamferSq chamfer_sq(const SampledSurface& a, const SampledSurface& b) {
    check_nonempty(a, b);
    SpatialIndex ia(a.points), ib(b.points);
    double sum = 0.0, sum_sq = 0.0;
    auto accumulate = [&](const SampledSurface& from, const SpatialIndex& to) {
        for (const Vec3& p : from.points) {
            double d2 = 0.0;
            to.nearest(p, &d2);
            sum += d2;
            sum_sq += d2 * d2;
        }
    };
    accumulate(a, ib);
    accumulate(b, ia);
    auto n = static_cast<double>(a.size() + b.size());
    return {sum / n, std::sqrt(sum_sq / n)};
}

double normal_consistency(const SampledSurface& a, const SampledSurface& b) {
    check_nonempty(a, b);
    if (a.normals.size() != a.points.size() || b.normals.size() != b.points.size())
        throw LengthMismatch("surfaces must carry one normal per point");
    SpatialIndex ia(a.points), ib(b.points);
    std::vector<std::uint32_t> ab = nn_indices(a, ib), ba = nn_indices(b, ia);
    double sum_ab = 0.0, sum_ba = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sum_ab += std::abs(a.normals[i].dot(b.normals[ab[i]]));
    for (std::size_t i = 0; i < b.size(); ++i)
        sum_ba += std::abs(b.normals[i].dot(a.normals[ba[i]]));
    return 0.5 * (sum_ab / static_cast<double>(a.size()) +
                  sum_ba / static_cast<double>(b.size()));
}

double label_iou(const LabelSet& pred, const LabelSet& truth, bool* both_empty) {
    if (pred.size() != truth.size())
        throw LengthMismatch("label sets differ: " + std::to_string(pred.size()) +
                             " vs " + std::to_string(truth.size()));
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = pred.labels[i] == 0, t = truth.labels[i] == 0;
        inter += p && t;
        uni += p || t;
    }
    if (both_empty) *both_empty = uni == 0;
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

SampledSurface sample_mesh(const TriangleMesh& mesh, std::size_t n,
                           std::uint64_t seed) {
    if (mesh.empty()) throw EmptyInput("cannot sample an empty mesh");
    if (n == 0) throw EmptyInput("sample count must be >= 1");

    std::vector<double> cdf(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
        total += mesh.face_area(f);
        cdf[f] = total;
    }
    if (total <= 0.0) throw ZeroArea("all triangles are degenerate");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    SampledSurface out;
    out.points.reserve(n);
    out.normals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double pick = uni(rng) * total;
        auto it = std::lower_bound(cdf.begin(), cdf.end(), pick);
        auto f = static_cast<std::size_t>(it - cdf.begin());
        if (f >= cdf.size()) f = cdf.size() - 1;
        // square-root trick: uniform over the triangle
        double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
        const auto& t = mesh.triangles[f];
        Vec3 p = mesh.vertices[t[0]] * (1.0 - r1) +
                 mesh.vertices[t[1]] * (r1 * (1.0 - r2)) +
                 mesh.vertices[t[2]] * (r1 * r2);
        out.points.push_back(p);
        out.normals.push_back(mesh.face_normal(f));
    }
    return out;
}

std::string MetricsReport::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\n";
    bool first = true;
    for (const auto& [k, v] : values) {
        if (!first) os << ",\n";
        first = false;
        os << "  \"" << k << "\": " << v;
    }
    for (const auto& [k, v] : provenance) {
        if (!first) os << ",\n";
        first = false;
        os << "  \"" << k << "\": \"" << v << "\"";
    }
    os << "\n}\n";
    return os.str();
}

}  // namespace surfrec
