#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "surfrec/errors.hpp"
#include "surfrec/kdtree.hpp"
#include "surfrec/tangent.hpp"

using namespace surfrec;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<Vec3> random_unit_vectors(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 v{g(rng), g(rng), g(rng)};
        while (v.norm() < 1e-9) v = {g(rng), g(rng), g(rng)};
        out.push_back(v.normalized());
    }
    return out;
}

// rotation matrix about a random axis
struct Rot {
    Vec3 r0, r1, r2;
    Vec3 apply(const Vec3& p) const { return {r0.dot(p), r1.dot(p), r2.dot(p)}; }
};

Rot random_rotation(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 a{g(rng), g(rng), g(rng)};
    a = a.normalized();
    Vec3 b = Vec3{g(rng), g(rng), g(rng)}.cross(a).normalized();
    Vec3 c = a.cross(b);
    return Rot{a, b, c};
}

}  // namespace

// ---------------------------------------------------------------------------
// eigen solver
// ---------------------------------------------------------------------------

TEST_CASE("symmetric eigen solve satisfies A v = lambda v") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        double m[3][3];
        m[0][0] = u(rng);
        m[1][1] = u(rng);
        m[2][2] = u(rng);
        m[0][1] = m[1][0] = u(rng);
        m[0][2] = m[2][0] = u(rng);
        m[1][2] = m[2][1] = u(rng);
        double w[3];
        Vec3 v[3];
        symmetric_eigen3(m, w, v);
        CHECK(w[0] <= w[1] + 1e-9);
        CHECK(w[1] <= w[2] + 1e-9);
        for (int k = 0; k < 3; ++k) {
            CHECK(v[k].norm() == doctest::Approx(1.0).epsilon(1e-8));
            Vec3 av{m[0][0] * v[k].x + m[0][1] * v[k].y + m[0][2] * v[k].z,
                    m[1][0] * v[k].x + m[1][1] * v[k].y + m[1][2] * v[k].z,
                    m[2][0] * v[k].x + m[2][1] * v[k].y + m[2][2] * v[k].z};
            CHECK((av - v[k] * w[k]).norm() < 1e-7);
        }
        // trace is preserved
        CHECK(w[0] + w[1] + w[2] ==
              doctest::Approx(m[0][0] + m[1][1] + m[2][2]).epsilon(1e-9));
    }
}

// ---------------------------------------------------------------------------
// frames
// ---------------------------------------------------------------------------

TEST_CASE("planar neighbors give the plane normal") {
    std::vector<Vec3> pos = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.3, 0.7, 0}};
    std::vector<Vec3> up(pos.size(), Vec3{0, 0, 1});
    TangentFrame f = estimate_frame({0.5, 0.5, 0.0}, pos, up);
    CHECK(!f.degenerate);
    CHECK((f.normal - Vec3{0, 0, 1}).norm() < 1e-9);

    std::vector<Vec3> down(pos.size(), Vec3{0, 0, -1});
    TangentFrame g = estimate_frame({0.5, 0.5, 0.0}, pos, down);
    CHECK((g.normal - Vec3{0, 0, -1}).norm() < 1e-9);
}

TEST_CASE("frame basis is orthonormal and right-handed") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vec3 n = random_unit_vectors(1, 1000 + trial)[0];
        Vec3 t1 = n.cross(random_unit_vectors(1, 2000 + trial)[0]).normalized();
        Vec3 t2 = n.cross(t1);
        std::vector<Vec3> pos, nrm;
        for (int i = 0; i < 40; ++i)
            pos.push_back(t1 * u(rng) + t2 * u(rng));
        nrm.assign(pos.size(), n);
        TangentFrame f = estimate_frame({0, 0, 0}, pos, nrm);
        CHECK(std::abs(f.u.dot(f.v)) < 1e-6);
        CHECK(std::abs(f.u.dot(f.normal)) < 1e-6);
        CHECK(std::abs(f.v.dot(f.normal)) < 1e-6);
        CHECK((f.u.cross(f.v) - f.normal).norm() < 1e-6);
        CHECK(f.normal.dot(f.average_normal) > 0.0);
    }
}

TEST_CASE("noisy plane samples recover the normal within five degrees") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::normal_distribution<double> noise(0.0, 0.01);
    Vec3 n = Vec3{0.3, -0.2, 0.93}.normalized();
    Vec3 t1 = n.cross(Vec3{0, 0, 1}).normalized();
    Vec3 t2 = n.cross(t1);
    std::vector<Vec3> pos, nrm;
    for (int i = 0; i < 50; ++i)
        pos.push_back(t1 * u(rng) + t2 * u(rng) + n * noise(rng));
    nrm.assign(pos.size(), n);
    TangentFrame f = estimate_frame({0, 0, 0}, pos, nrm);
    CHECK(!f.degenerate);
    double angle = std::acos(std::clamp(f.normal.dot(n), -1.0, 1.0));
    CHECK(angle < 5.0 * kPi / 180.0);
    CHECK(f.normal.dot(f.average_normal) > 0.0);
}

TEST_CASE("too few neighbors is an error") {
    std::vector<Vec3> pos = {{0, 0, 0}, {1, 0, 0}};
    std::vector<Vec3> nrm = {{0, 0, 1}, {0, 0, 1}};
    CHECK_THROWS_AS(estimate_frame({0, 0, 0}, pos, nrm), TooFewNeighbors);
}

TEST_CASE("orientation holds and flips with the input normals") {
    // random bumpy height field; every frame must satisfy n_p . n_a > 0
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    std::vector<Vec3> pos, nrm;
    for (int i = 0; i < 2000; ++i) {
        double x = u(rng), y = u(rng);
        double z = 0.5 + 0.05 * std::sin(8 * x) * std::cos(8 * y);
        Vec3 n = Vec3{-0.4 * std::cos(8 * x) * std::cos(8 * y),
                      0.4 * std::sin(8 * x) * std::sin(8 * y), 1.0}
                     .normalized();
        pos.push_back({x, y, z});
        nrm.push_back(n);
    }
    SpatialIndex index(pos);
    std::vector<Vec3> queries(pos.begin(), pos.begin() + 300);
    auto frames = estimate_frames(queries, index, pos, nrm, 0.06);

    std::vector<Vec3> flipped(nrm.size());
    for (std::size_t i = 0; i < nrm.size(); ++i) flipped[i] = -nrm[i];
    auto frames_f = estimate_frames(queries, index, pos, flipped, 0.06);

    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!frames[i].degenerate)
            CHECK(frames[i].normal.dot(frames[i].average_normal) > 0.0);
        // flipping every input normal flips the frame normal
        CHECK((frames_f[i].normal + frames[i].normal).norm() < 1e-9);
    }
}

// ---------------------------------------------------------------------------
// gather tables
// ---------------------------------------------------------------------------

namespace {

TangentFrame plain_frame(const Vec3& origin) {
    TangentFrame f;
    f.origin = origin;
    f.normal = {0, 0, 1};
    f.u = {1, 0, 0};
    f.v = {0, 1, 0};
    f.average_normal = {0, 0, 1};
    return f;
}

// independent project-and-bin reference mirroring the documented rule:
// nearest pixel of an l x l image spanning [-radius, radius]^2, equal weights
std::map<std::size_t, std::vector<std::uint32_t>> brute_bins(
    const Vec3& query, const TangentFrame& frame, const std::vector<Vec3>& src,
    double radius, std::uint32_t l) {
    std::map<std::size_t, std::vector<std::uint32_t>> bins;
    double pixel = 2.0 * radius / l;
    for (std::uint32_t i = 0; i < src.size(); ++i) {
        if ((src[i] - query).norm() > radius) continue;
        Vec3 d = src[i] - frame.origin;
        auto bin1 = [&](double t) {
            auto c = static_cast<std::int64_t>(std::floor((t + radius) / pixel));
            return static_cast<std::size_t>(std::clamp<std::int64_t>(c, 0, l - 1));
        };
        bins[bin1(d.dot(frame.v)) * l + bin1(d.dot(frame.u))].push_back(i);
    }
    return bins;
}

}  // namespace

TEST_CASE("single neighbor at the query lands in the center pixel") {
    std::vector<Vec3> src = {{0.5, 0.5, 0.5}};
    SpatialIndex index(src);
    std::vector<Vec3> queries = {{0.5, 0.5, 0.5}};
    std::vector<TangentFrame> frames = {plain_frame(queries[0])};
    GatherTable t = precompute_gather(queries, frames, index, 0.1, 3);
    REQUIRE(t.num_locations == 1);
    for (std::size_t p = 0; p < 9; ++p) {
        std::uint64_t n = t.pixel_offsets[p + 1] - t.pixel_offsets[p];
        if (p == 4) {
            CHECK(n == 1);
            CHECK(t.entries[t.pixel_offsets[p]].source == 0);
            CHECK(t.entries[t.pixel_offsets[p]].weight == 1.0);
        } else {
            CHECK(n == 0);
        }
    }
}

TEST_CASE("out-of-radius neighbors produce an empty row") {
    std::vector<Vec3> src = {{0.9, 0.5, 0.5}};
    SpatialIndex index(src);
    std::vector<Vec3> queries = {{0.1, 0.5, 0.5}};
    std::vector<TangentFrame> frames = {plain_frame(queries[0])};
    GatherTable t = precompute_gather(queries, frames, index, 0.2, 3);
    CHECK(t.entries.empty());
    for (std::size_t p = 0; p < 9; ++p)
        CHECK(t.pixel_offsets[p + 1] == t.pixel_offsets[p]);
}

TEST_CASE("gather matches the brute-force project-and-bin reference") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.3, 0.7);
    std::vector<Vec3> src, nrm;
    for (int i = 0; i < 200; ++i) {
        src.push_back({u(rng), u(rng), u(rng)});
        nrm.push_back({0, 0, 1});
    }
    SpatialIndex index(src);
    std::vector<Vec3> queries;
    for (int i = 0; i < 20; ++i) queries.push_back({u(rng), u(rng), u(rng)});
    auto frames = estimate_frames(queries, index, src, nrm, 0.15);
    double radius = 0.1;
    GatherTable t = precompute_gather(queries, frames, index, radius, 3);

    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto oracle = brute_bins(queries[q], frames[q], src, radius, 3);
        for (std::size_t p = 0; p < 9; ++p) {
            std::uint64_t begin = t.pixel_offsets[q * 9 + p];
            std::uint64_t end = t.pixel_offsets[q * 9 + p + 1];
            auto it = oracle.find(p);
            std::vector<std::uint32_t> want =
                it == oracle.end() ? std::vector<std::uint32_t>{} : it->second;
            REQUIRE(end - begin == want.size());
            double wsum = 0.0;
            for (std::uint64_t e = begin; e < end; ++e) {
                CHECK(t.entries[e].source == want[e - begin]);  // ascending
                wsum += t.entries[e].weight;
            }
            if (!want.empty()) CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("gather never references a source outside the radius") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    std::vector<Vec3> src, nrm;
    for (int i = 0; i < 500; ++i) {
        src.push_back({u(rng), u(rng), u(rng)});
        nrm.push_back(random_unit_vectors(1, 9000 + i)[0]);
    }
    SpatialIndex index(src);
    std::vector<Vec3> queries(src.begin(), src.begin() + 50);
    auto frames = estimate_frames(queries, index, src, nrm, 0.1);
    double radius = 0.07;
    GatherTable t = precompute_gather(queries, frames, index, radius, 3);
    for (std::size_t q = 0; q < queries.size(); ++q)
        for (std::uint64_t e = t.pixel_offsets[q * 9];
             e < t.pixel_offsets[(q + 1) * 9]; ++e)
            CHECK((src[t.entries[e].source] - queries[q]).norm() <=
                  radius + 1e-15);
}

// ---------------------------------------------------------------------------
// signals
// ---------------------------------------------------------------------------

TEST_CASE("signal examples: on-plane and offset neighbors") {
    std::vector<Vec3> src = {{0.5, 0.5, 0.5}};
    std::vector<Vec3> nrm = {{0, 0, 1}};
    SpatialIndex index(src);
    std::vector<Vec3> queries = {{0.5, 0.5, 0.5}};
    std::vector<TangentFrame> frames = {plain_frame(queries[0])};
    GatherTable t = precompute_gather(queries, frames, index, 0.1, 3);
    SignalImage sig = compute_signals(t, frames, src, nrm);
    // neighbor exactly on the tangent plane: channel 0 is zero
    CHECK(sig.data[(4 * 4) + 0] == 0.0);
    CHECK(sig.data[(4 * 4) + 3] == doctest::Approx(1.0));

    // neighbor at origin + 0.02 * n_p with normal n_p
    src[0] = {0.5, 0.5, 0.52};
    SpatialIndex index2(src);
    GatherTable t2 = precompute_gather(queries, frames, index2, 0.1, 3);
    SignalImage sig2 = compute_signals(t2, frames, src, nrm);
    const double* px = &sig2.data[4 * 4];
    CHECK(px[0] == doctest::Approx(0.02));
    CHECK(px[1] == doctest::Approx(0.0));
    CHECK(px[2] == doctest::Approx(0.0));
    CHECK(px[3] == doctest::Approx(1.0));
}

TEST_CASE("signals equal the direct-formula oracle") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(0.3, 0.7);
    std::vector<Vec3> src;
    auto nrm = random_unit_vectors(300, 48);
    for (int i = 0; i < 300; ++i) src.push_back({u(rng), u(rng), u(rng)});
    SpatialIndex index(src);
    std::vector<Vec3> queries(src.begin(), src.begin() + 30);
    auto frames = estimate_frames(queries, index, src, nrm, 0.12);
    GatherTable t = precompute_gather(queries, frames, index, 0.1, 3);
    SignalImage sig = compute_signals(t, frames, src, nrm);
    for (std::size_t q = 0; q < queries.size(); ++q)
        for (std::size_t p = 0; p < 9; ++p) {
            double d = 0, nu = 0, nv = 0, nw = 0;
            for (std::uint64_t e = t.pixel_offsets[q * 9 + p];
                 e < t.pixel_offsets[q * 9 + p + 1]; ++e) {
                const auto& entry = t.entries[e];
                d += entry.weight *
                     (src[entry.source] - frames[q].origin).dot(frames[q].normal);
                nu += entry.weight * nrm[entry.source].dot(frames[q].u);
                nv += entry.weight * nrm[entry.source].dot(frames[q].v);
                nw += entry.weight * nrm[entry.source].dot(frames[q].normal);
            }
            const double* px = &sig.data[(q * 9 + p) * 4];
            CHECK(px[0] == doctest::Approx(d).epsilon(1e-12));
            CHECK(px[1] == doctest::Approx(nu).epsilon(1e-12));
            CHECK(px[2] == doctest::Approx(nv).epsilon(1e-12));
            CHECK(px[3] == doctest::Approx(nw).epsilon(1e-12));
        }
}

TEST_CASE("signals are invariant under global rotation") {
    // bumpy patch, rotated rigidly; pixel-binning ties are avoided by the
    // smooth sampling (no projection lands on a pixel boundary)
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.35, 0.65);
    std::vector<Vec3> src, nrm;
    for (int i = 0; i < 400; ++i) {
        double x = u(rng), y = u(rng);
        src.push_back({x, y, 0.5 + 0.03 * std::sin(9.1 * x + 0.3) * std::cos(8.7 * y)});
        Vec3 n = Vec3{-0.273 * std::cos(9.1 * x + 0.3) * std::cos(8.7 * y),
                      0.261 * std::sin(9.1 * x + 0.3) * std::sin(8.7 * y), 1.0}
                     .normalized();
        nrm.push_back(n);
    }
    std::vector<Vec3> queries(src.begin(), src.begin() + 40);

    Rot R = random_rotation(99);
    Vec3 center{0.5, 0.5, 0.5};
    std::vector<Vec3> src_r, nrm_r, queries_r;
    for (std::size_t i = 0; i < src.size(); ++i) {
        src_r.push_back(R.apply(src[i] - center) + center);
        nrm_r.push_back(R.apply(nrm[i]));
    }
    for (const Vec3& q : queries) queries_r.push_back(R.apply(q - center) + center);

    SpatialIndex index(src), index_r(src_r);
    double radius = 0.06;
    auto frames = estimate_frames(queries, index, src, nrm, radius);

    // the estimated frame normal transforms with the rotation
    auto frames_est = estimate_frames(queries_r, index_r, src_r, nrm_r, radius);
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (!frames[i].degenerate)
            CHECK((frames_est[i].normal - R.apply(frames[i].normal)).norm() < 1e-5);

    // with frames transported by the rotation, gather assignments and signal
    // images match pixel for pixel
    std::vector<TangentFrame> frames_r;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        TangentFrame f = frames[i];
        f.origin = R.apply(f.origin - center) + center;
        f.normal = R.apply(f.normal);
        f.u = R.apply(f.u);
        f.v = R.apply(f.v);
        f.average_normal = R.apply(f.average_normal);
        frames_r.push_back(f);
    }
    SignalImage a = compute_signals(precompute_gather(queries, frames, index, radius, 3),
                                    frames, src, nrm);
    SignalImage b = compute_signals(
        precompute_gather(queries_r, frames_r, index_r, radius, 3), frames_r,
        src_r, nrm_r);
    REQUIRE(a.data.size() == b.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5).scale(1.0));
}

// ---------------------------------------------------------------------------
// pyramid
// ---------------------------------------------------------------------------

TEST_CASE("depth-8 pyramid reports the exact cell size schedule") {
    std::vector<Vec3> pts = {{0.5, 0.5, 0.5}, {0.6, 0.5, 0.5}};
    std::vector<Vec3> verts = {{0.5, 0.5, 0.5}};
    std::vector<std::array<std::uint32_t, 3>> lattice = {{128, 128, 128}};
    ScalePyramid pyr = build_pyramid(pts, verts, lattice, 8);
    CHECK(pyr.point_cell_size(1) == 1.0 / 1024.0);
    CHECK(pyr.point_cell_size(2) == 1.0 / 512.0);
    CHECK(pyr.point_cell_size(3) == 1.0 / 256.0);
    CHECK(pyr.vertex_cell_size(1) == 1.0 / 256.0);  // lattice pitch (identity)
    CHECK(pyr.vertex_cell_size(2) == 1.0 / 128.0);
    CHECK(pyr.vertex_cell_size(3) == 1.0 / 64.0);
    CHECK(pyr.point_levels.size() == 3);
    CHECK(pyr.vertex_levels.size() == 2);
}

TEST_CASE("points sharing one cell pool to their centroid") {
    int depth = 4;  // finest point cell size 1/64
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(0.0, 1.0 / 64.0);
    std::vector<Vec3> pts;
    Vec3 base{10.0 / 64.0, 20.0 / 64.0, 30.0 / 64.0};
    Vec3 sum{0, 0, 0};
    for (int i = 0; i < 8; ++i) {
        Vec3 p = base + Vec3{u(rng), u(rng), u(rng)};
        pts.push_back(p);
        sum += p;
    }
    std::vector<Vec3> verts = {{0.5, 0.5, 0.5}};
    std::vector<std::array<std::uint32_t, 3>> lattice = {{8, 8, 8}};
    ScalePyramid pyr = build_pyramid(pts, verts, lattice, depth);
    REQUIRE(pyr.point_levels[0].positions.size() == 1);
    CHECK((pyr.point_levels[0].positions[0] - sum / 8.0).norm() < 1e-12);
    for (std::uint32_t c : pyr.point_levels[0].pool_from_prev) CHECK(c == 0);
}

TEST_CASE("cell membership matches the floor-binning oracle") {
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    int depth = 5;
    std::vector<Vec3> pts;
    for (int i = 0; i < 1500; ++i) pts.push_back({u(rng), u(rng), u(rng)});
    std::vector<Vec3> verts;
    std::vector<std::array<std::uint32_t, 3>> lattice;
    std::set<std::array<std::uint32_t, 3>> seen;
    std::uniform_int_distribution<std::uint32_t> li(0, 1u << depth);
    for (int i = 0; i < 500; ++i) {
        std::array<std::uint32_t, 3> l = {li(rng), li(rng), li(rng)};
        if (!seen.insert(l).second) continue;
        lattice.push_back(l);
        double h = 1.0 / (1u << depth);
        verts.push_back({l[0] * h, l[1] * h, l[2] * h});
    }
    ScalePyramid pyr = build_pyramid(pts, verts, lattice, depth);

    // two fine points share a scale-1 representative iff they share the
    // 1/2^(D+2) floor cell
    auto cell_of = [&](const Vec3& p, int k) {
        double s = double(1u << k);
        auto f = [&](double x) {
            return std::int64_t(std::clamp(std::floor(x * s), 0.0, s - 1.0));
        };
        return std::array<std::int64_t, 3>{f(p.x), f(p.y), f(p.z)};
    };
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < std::min(pts.size(), i + 40); ++j) {
            bool same_cell = cell_of(pts[i], depth + 2) == cell_of(pts[j], depth + 2);
            bool same_rep = pyr.point_levels[0].pool_from_prev[i] ==
                            pyr.point_levels[0].pool_from_prev[j];
            CHECK(same_cell == same_rep);
        }
    // vertex scale-2 membership is the lattice coordinate halved
    for (std::size_t i = 0; i < verts.size(); ++i)
        for (std::size_t j = i + 1; j < verts.size(); ++j) {
            bool same_cell = lattice[i][0] / 2 == lattice[j][0] / 2 &&
                             lattice[i][1] / 2 == lattice[j][1] / 2 &&
                             lattice[i][2] / 2 == lattice[j][2] / 2;
            bool same_rep = pyr.vertex_levels[0].pool_from_prev[i] ==
                            pyr.vertex_levels[0].pool_from_prev[j];
            CHECK(same_cell == same_rep);
        }
    // every fine element belongs to exactly one coarse cell, all cells hit
    for (const auto& level :
         {pyr.point_levels[0], pyr.point_levels[1], pyr.point_levels[2],
          pyr.vertex_levels[0], pyr.vertex_levels[1]}) {
        std::vector<int> hit(level.positions.size(), 0);
        for (std::uint32_t c : level.pool_from_prev) {
            REQUIRE(c < level.positions.size());
            hit[c] = 1;
        }
        for (int h : hit) CHECK(h == 1);
    }
}

TEST_CASE("shallow depth is rejected") {
    std::vector<Vec3> pts = {{0.5, 0.5, 0.5}};
    std::vector<Vec3> verts = {{0.5, 0.5, 0.5}};
    std::vector<std::array<std::uint32_t, 3>> lattice = {{2, 2, 2}};
    CHECK_THROWS_AS(build_pyramid(pts, verts, lattice, 2), DepthTooShallow);
}

// ---------------------------------------------------------------------------
// gather table cache
// ---------------------------------------------------------------------------

TEST_CASE("gather table cache roundtrip is bit-exact") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(0.3, 0.7);
    std::vector<Vec3> src, nrm;
    for (int i = 0; i < 200; ++i) {
        src.push_back({u(rng), u(rng), u(rng)});
        nrm.push_back({0, 0, 1});
    }
    SpatialIndex index(src);
    std::vector<Vec3> queries(src.begin(), src.begin() + 25);
    auto frames = estimate_frames(queries, index, src, nrm, 0.1);
    GatherTable t = precompute_gather(queries, frames, index, 0.08, 3);

    std::string path = "tangent_cache.srgt";
    save_gather_table(t, path);
    GatherTable back = load_gather_table(path);
    CHECK(back.extent == t.extent);
    CHECK(back.radius == t.radius);
    CHECK(back.num_locations == t.num_locations);
    CHECK(back.pixel_offsets == t.pixel_offsets);
    REQUIRE(back.entries.size() == t.entries.size());
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        CHECK(back.entries[i].source == t.entries[i].source);
        CHECK(back.entries[i].weight == t.entries[i].weight);  // bitwise
    }
    std::remove(path.c_str());
}

TEST_CASE("gather table cache rejects corruption") {
    std::vector<Vec3> src = {{0.5, 0.5, 0.5}};
    SpatialIndex index(src);
    std::vector<Vec3> queries = {{0.5, 0.5, 0.5}};
    std::vector<TangentFrame> frames = {plain_frame(queries[0])};
    GatherTable t = precompute_gather(queries, frames, index, 0.1, 3);
    std::string path = "tangent_bad.srgt";
    save_gather_table(t, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');  // clobber the magic
    }
    CHECK_THROWS_AS(load_gather_table(path), MalformedFile);
    std::remove(path.c_str());
}
