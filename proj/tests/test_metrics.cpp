#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "surfrec/analytic.hpp"
#include "surfrec/errors.hpp"
#include "surfrec/metrics.hpp"

using namespace surfrec;

namespace {

SampledSurface random_surface(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    SampledSurface s;
    for (std::size_t i = 0; i < n; ++i) {
        s.points.push_back({u(rng), u(rng), u(rng)});
        Vec3 nrm{g(rng), g(rng), g(rng)};
        if (nrm.norm() < 1e-12) nrm = {0, 0, 1};
        s.normals.push_back(nrm.normalized());
    }
    return s;
}

// quadratic-scan references
double brute_chamfer_l1(const SampledSurface& a, const SampledSurface& b) {
    auto one_way = [](const SampledSurface& from, const SampledSurface& to) {
        double sum = 0.0;
        for (const Vec3& p : from.points) {
            double best = 1e300;
            for (const Vec3& q : to.points)
                best = std::min(best, (p - q).norm());
            sum += best;
        }
        return sum / double(from.points.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

ChamferSq brute_chamfer_sq(const SampledSurface& a, const SampledSurface& b) {
    std::vector<double> sq;
    auto collect = [&](const SampledSurface& from, const SampledSurface& to) {
        for (const Vec3& p : from.points) {
            double best = 1e300;
            for (const Vec3& q : to.points)
                best = std::min(best, (p - q).squared_norm());
            sq.push_back(best);
        }
    };
    collect(a, b);
    collect(b, a);
    ChamferSq out;
    for (double d : sq) out.mean += d;
    out.mean /= double(sq.size());
    for (double d : sq) out.rms += d * d;
    out.rms = std::sqrt(out.rms / double(sq.size()));
    return out;
}

double brute_normal_consistency(const SampledSurface& a,
                                const SampledSurface& b) {
    auto one_way = [](const SampledSurface& from, const SampledSurface& to) {
        double sum = 0.0;
        for (std::size_t i = 0; i < from.points.size(); ++i) {
            double best = 1e300;
            std::size_t arg = 0;
            for (std::size_t j = 0; j < to.points.size(); ++j) {
                double d = (from.points[i] - to.points[j]).squared_norm();
                if (d < best) best = d, arg = j;
            }
            sum += std::abs(from.normals[i].dot(to.normals[arg]));
        }
        return sum / double(from.points.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

LabelSet make_labels(std::initializer_list<int> l) {
    LabelSet out;
    for (int v : l) out.labels.push_back(static_cast<std::uint8_t>(v));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// label metrics
// ---------------------------------------------------------------------------

TEST_CASE("vertex accuracy on hand-built label sets") {
    CHECK(vertex_accuracy(make_labels({0, 1, 0, 1}), make_labels({0, 1, 0, 1})) ==
          1.0);
    CHECK(vertex_accuracy(make_labels({0, 1, 0, 1}), make_labels({1, 0, 1, 0})) ==
          0.0);
    CHECK(vertex_accuracy(make_labels({0, 1, 0, 1}), make_labels({0, 1, 0, 0})) ==
          0.75);
    CHECK_THROWS_AS(vertex_accuracy(make_labels({0, 1}), make_labels({0})),
                    LengthMismatch);
}

TEST_CASE("label iou counts the inside sets") {
    // inside = label 0; pred {0,2}, truth {0,1}: intersection 1, union 3
    CHECK(label_iou(make_labels({0, 1, 0, 1}), make_labels({0, 0, 1, 1})) ==
          doctest::Approx(1.0 / 3.0));
    CHECK(label_iou(make_labels({0, 0}), make_labels({0, 0})) == 1.0);
    bool both_empty = false;
    CHECK(label_iou(make_labels({1, 1}), make_labels({1, 1}), &both_empty) == 1.0);
    CHECK(both_empty);
    both_empty = true;
    label_iou(make_labels({0, 1}), make_labels({0, 1}), &both_empty);
    CHECK(!both_empty);
    CHECK_THROWS_AS(label_iou(make_labels({0}), make_labels({0, 1})),
                    LengthMismatch);
}

TEST_CASE("label iou equals the set-arithmetic oracle") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        LabelSet a, b;
        std::size_t n = 200 + (rng() % 300);
        std::set<std::size_t> ia, ib;
        for (std::size_t i = 0; i < n; ++i) {
            a.labels.push_back(static_cast<std::uint8_t>(rng() & 1));
            b.labels.push_back(static_cast<std::uint8_t>(rng() & 1));
            if (a.labels.back() == 0) ia.insert(i);
            if (b.labels.back() == 0) ib.insert(i);
        }
        std::vector<std::size_t> inter, uni;
        std::set_intersection(ia.begin(), ia.end(), ib.begin(), ib.end(),
                              std::back_inserter(inter));
        std::set_union(ia.begin(), ia.end(), ib.begin(), ib.end(),
                       std::back_inserter(uni));
        double want = uni.empty() ? 1.0 : double(inter.size()) / double(uni.size());
        CHECK(label_iou(a, b) == doctest::Approx(want).epsilon(1e-12));
    }
}

// ---------------------------------------------------------------------------
// distance metrics
// ---------------------------------------------------------------------------

TEST_CASE("chamfer and normal consistency match the quadratic scan") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_surface(60 + (rng() % 80), 1000 + trial);
        auto b = random_surface(60 + (rng() % 80), 2000 + trial);
        CHECK(chamfer_l1(a, b) ==
              doctest::Approx(brute_chamfer_l1(a, b)).epsilon(1e-9));
        ChamferSq got = chamfer_sq(a, b);
        ChamferSq want = brute_chamfer_sq(a, b);
        CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-9));
        CHECK(got.rms == doctest::Approx(want.rms).epsilon(1e-9));
        CHECK(normal_consistency(a, b) ==
              doctest::Approx(brute_normal_consistency(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("identical surfaces score zero distance and full consistency") {
    auto a = random_surface(500, 31);
    CHECK(chamfer_l1(a, a) == 0.0);
    CHECK(chamfer_sq(a, a).mean == 0.0);
    CHECK(normal_consistency(a, a) == doctest::Approx(1.0));
}

TEST_CASE("distance metrics are invariant under rigid motion") {
    auto a = random_surface(300, 37);
    auto b = random_surface(300, 38);
    double d0 = chamfer_l1(a, b);
    double n0 = normal_consistency(a, b);

    // rotate about z by a fixed angle, then translate
    double c = std::cos(0.7), s = std::sin(0.7);
    Vec3 shift{0.3, -0.2, 0.1};
    auto move = [&](SampledSurface& surf) {
        for (Vec3& p : surf.points)
            p = Vec3{c * p.x - s * p.y, s * p.x + c * p.y, p.z} + shift;
        for (Vec3& n : surf.normals)
            n = {c * n.x - s * n.y, s * n.x + c * n.y, n.z};
    };
    move(a);
    move(b);
    CHECK(chamfer_l1(a, b) == doctest::Approx(d0).epsilon(1e-9));
    CHECK(normal_consistency(a, b) == doctest::Approx(n0).epsilon(1e-9));
}

TEST_CASE("normal consistency ignores orientation flips") {
    auto a = random_surface(200, 41);
    auto b = random_surface(200, 42);
    double n0 = normal_consistency(a, b);
    for (Vec3& n : b.normals) n = -n;
    CHECK(normal_consistency(a, b) == doctest::Approx(n0).epsilon(1e-12));
}

TEST_CASE("empty inputs are rejected") {
    SampledSurface empty;
    auto a = random_surface(10, 43);
    CHECK_THROWS_AS(chamfer_l1(empty, a), EmptyInput);
    CHECK_THROWS_AS(chamfer_l1(a, empty), EmptyInput);
    CHECK_THROWS_AS(chamfer_sq(empty, a), EmptyInput);
    CHECK_THROWS_AS(normal_consistency(a, empty), EmptyInput);
}

// ---------------------------------------------------------------------------
// mesh sampling
// ---------------------------------------------------------------------------

TEST_CASE("mesh sampling is deterministic and lands on the surface") {
    TriangleMesh mesh = icosphere_mesh({0.5, 0.5, 0.5}, 0.3, 2);
    auto a = sample_mesh(mesh, 5000, 7);
    auto b = sample_mesh(mesh, 5000, 7);
    REQUIRE(a.size() == 5000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.normals[i].z == b.normals[i].z);
    }
    // every sample lies on some face plane with its face normal
    MeshDistanceQuery query(mesh);
    for (std::size_t i = 0; i < a.size(); i += 50) {
        auto cp = query.closest_point(a.points[i]);
        CHECK(cp.sq_dist < 1e-18);
        CHECK(std::abs(a.normals[i].norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("sampling frequency is proportional to area") {
    // two parallel triangles, the second with four times the area
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0},
                     {0, 0, 0.5}, {0.2, 0, 0.5}, {0, 0.2, 0.5}};
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
    const std::size_t n = 50000;
    auto s = sample_mesh(mesh, n, 11);
    std::size_t big = 0;
    for (const Vec3& p : s.points)
        if (p.z > 0.25) ++big;
    // binomial(n, 0.8): five sigma is ~0.0045
    CHECK(double(big) / double(n) == doctest::Approx(0.8).epsilon(0.012));
}

TEST_CASE("sampling rejects empty and fully degenerate meshes") {
    TriangleMesh empty;
    CHECK_THROWS_AS(sample_mesh(empty, 10, 1), EmptyInput);
    TriangleMesh flat;
    flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    flat.triangles = {{0, 1, 2}};
    CHECK_THROWS_AS(sample_mesh(flat, 10, 1), ZeroArea);
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

TEST_CASE("metric reports serialize with stable key order") {
    MetricsReport r;
    r.values["chamfer_l1"] = 0.5;
    r.values["accuracy"] = 1.0;
    r.provenance["config"] = "cafe";
    std::string json = r.to_json();
    // std::map iterates alphabetically, so the layout is reproducible
    CHECK(json == r.to_json());
    CHECK(json.find("accuracy") != std::string::npos);
    CHECK(json.find("accuracy") < json.find("chamfer_l1"));
    CHECK(json.find("config") != std::string::npos);
}
