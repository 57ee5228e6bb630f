#include "surfrec/tangent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "surfrec/errors.hpp"
#include "surfrec/octree.hpp"

namespace surfrec {

// ---------------------------------------------------------------------------
// closed-form symmetric 3x3 eigensolver
// ---------------------------------------------------------------------------

namespace {

Vec3 row(const double m[3][3], int i) { return {m[i][0], m[i][1], m[i][2]}; }

// eigenvector of (A - lambda I) via the largest cross product of its rows
Vec3 eigenvector_for(const double m[3][3], double lambda) {
    double a[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i][j] = m[i][j] - (i == j ? lambda : 0.0);
    Vec3 r0 = row(a, 0), r1 = row(a, 1), r2 = row(a, 2);
    Vec3 c01 = r0.cross(r1), c02 = r0.cross(r2), c12 = r1.cross(r2);
    double n01 = c01.squared_norm(), n02 = c02.squared_norm(), n12 = c12.squared_norm();
    Vec3 best = c01;
    double bestn = n01;
    if (n02 > bestn) { best = c02; bestn = n02; }
    if (n12 > bestn) { best = c12; bestn = n12; }
    if (bestn <= 0.0) return {0.0, 0.0, 0.0};  // repeated eigenvalue
    return best / std::sqrt(bestn);
}

Vec3 any_unit_orthogonal(const Vec3& n) {
    // axis least aligned with n
    Vec3 a = std::abs(n.x) <= std::abs(n.y)
                 ? (std::abs(n.x) <= std::abs(n.z) ? Vec3{1, 0, 0} : Vec3{0, 0, 1})
                 : (std::abs(n.y) <= std::abs(n.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    return a.cross(n).normalized();
}

}  // namespace

void symmetric_eigen3(const double m_in[3][3], double eigenvalues[3],
                      Vec3 eigenvectors[3]) {
    // scale to unit magnitude for numerical range
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(m_in[i][j]));
    if (scale == 0.0) {
        eigenvalues[0] = eigenvalues[1] = eigenvalues[2] = 0.0;
        eigenvectors[0] = {1, 0, 0};
        eigenvectors[1] = {0, 1, 0};
        eigenvectors[2] = {0, 0, 1};
        return;
    }
    double m[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = m_in[i][j] / scale;

    // trigonometric solution of the characteristic cubic
    double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    double b00 = m[0][0] - q, b11 = m[1][1] - q, b22 = m[2][2] - q;
    double p2 = b00 * b00 + b11 * b11 + b22 * b22 +
                2.0 * (m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]);
    double p = std::sqrt(p2 / 6.0);

    double w[3];
    if (p <= 1e-300) {
        w[0] = w[1] = w[2] = q;
    } else {
        // det(B/p) / 2 clamped into [-1, 1]
        double inv_p = 1.0 / p;
        double c00 = b00 * inv_p, c11 = b11 * inv_p, c22 = b22 * inv_p;
        double c01 = m[0][1] * inv_p, c02 = m[0][2] * inv_p, c12 = m[1][2] * inv_p;
        double det = c00 * (c11 * c22 - c12 * c12) - c01 * (c01 * c22 - c12 * c02) +
                     c02 * (c01 * c12 - c11 * c02);
        double r = std::clamp(det / 2.0, -1.0, 1.0);
        double phi = std::acos(r) / 3.0;
        w[2] = q + 2.0 * p * std::cos(phi);
        w[0] = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
        w[1] = 3.0 * q - w[0] - w[2];
    }

    Vec3 v0 = eigenvector_for(m, w[0]);
    Vec3 v2 = eigenvector_for(m, w[2]);
    if (v2.squared_norm() == 0.0 && v0.squared_norm() > 0.0)
        v2 = any_unit_orthogonal(v0);
    if (v0.squared_norm() == 0.0 && v2.squared_norm() > 0.0)
        v0 = any_unit_orthogonal(v2);
    if (v0.squared_norm() == 0.0) {  // fully degenerate (spherical)
        v0 = {1, 0, 0};
        v2 = {0, 0, 1};
    }
    // enforce orthogonality against rounding in near-degenerate spectra
    v2 = (v2 - v0 * v2.dot(v0)).normalized();
    if (v2.squared_norm() == 0.0) v2 = any_unit_orthogonal(v0);
    Vec3 v1 = v2.cross(v0).normalized();

    eigenvalues[0] = w[0] * scale;
    eigenvalues[1] = w[1] * scale;
    eigenvalues[2] = w[2] * scale;
    eigenvectors[0] = v0;
    eigenvectors[1] = v1;
    eigenvectors[2] = v2;
}

// ---------------------------------------------------------------------------
// frames
// ---------------------------------------------------------------------------

namespace {

TangentFrame finish_frame(const Vec3& query, Vec3 normal, const Vec3& n_a,
                          bool degenerate) {
    TangentFrame frame;
    frame.origin = query;
    frame.average_normal = n_a;
    frame.degenerate = degenerate;

    double dot = normal.dot(n_a);
    if (dot < 0.0) {
        normal = -normal;
    } else if (dot == 0.0) {
        // measure-zero tie: orient by the sign of the first nonzero component
        double c = normal.x != 0.0 ? normal.x : (normal.y != 0.0 ? normal.y : normal.z);
        if (c < 0.0) normal = -normal;
    }
    frame.normal = normal;
    frame.u = any_unit_orthogonal(normal);
    frame.v = normal.cross(frame.u);  // {u, v, normal} right-handed
    return frame;
}

}  // namespace

TangentFrame estimate_frame(const Vec3& query,
                            const std::vector<Vec3>& neighbor_positions,
                            const std::vector<Vec3>& neighbor_normals) {
    if (neighbor_positions.size() < 3)
        throw TooFewNeighbors("frame estimation needs >= 3 neighbors, got " +
                              std::to_string(neighbor_positions.size()));

    const std::size_t n = neighbor_positions.size();
    Vec3 centroid{0, 0, 0};
    for (const Vec3& p : neighbor_positions) centroid += p;
    centroid = centroid / static_cast<double>(n);

    Vec3 n_a{0, 0, 0};
    for (const Vec3& nn : neighbor_normals) n_a += nn;
    n_a = n_a / static_cast<double>(n);

    double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (const Vec3& p : neighbor_positions) {
        Vec3 d = p - centroid;
        cov[0][0] += d.x * d.x;
        cov[0][1] += d.x * d.y;
        cov[0][2] += d.x * d.z;
        cov[1][1] += d.y * d.y;
        cov[1][2] += d.y * d.z;
        cov[2][2] += d.z * d.z;
    }
    cov[1][0] = cov[0][1];
    cov[2][0] = cov[0][2];
    cov[2][1] = cov[1][2];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cov[i][j] /= static_cast<double>(n);

    double evals[3];
    Vec3 evecs[3];
    symmetric_eigen3(cov, evals, evecs);

    // rank < 2 within tolerance: the two largest eigenvalues do not both
    // dominate noise; the covariance direction is unreliable
    constexpr double kRankTol = 1e-12;
    bool rank_deficient = evals[1] <= kRankTol * std::max(evals[2], 1e-300) ||
                          evals[2] <= 0.0;
    if (rank_deficient) {
        Vec3 fallback = n_a.squared_norm() > 0.0 ? n_a.normalized() : Vec3{0, 0, 1};
        return finish_frame(query, fallback, n_a, /*degenerate=*/true);
    }
    return finish_frame(query, evecs[0], n_a, /*degenerate=*/false);
}

std::vector<TangentFrame> estimate_frames(const std::vector<Vec3>& queries,
                                          const SpatialIndex& index,
                                          const std::vector<Vec3>& positions,
                                          const std::vector<Vec3>& normals,
                                          double radius) {
    std::vector<TangentFrame> frames;
    frames.reserve(queries.size());
    std::vector<std::uint32_t> hits;
    std::vector<Vec3> np, nn;
    for (const Vec3& q : queries) {
        index.radius_query(q, radius, hits);
        if (hits.size() < 3) {
            TangentFrame frame;
            frame.origin = q;
            frame.degenerate = true;
            if (!hits.empty()) {
                Vec3 n_a{0, 0, 0};
                for (std::uint32_t i : hits) n_a += normals[i];
                n_a = n_a / static_cast<double>(hits.size());
                frame = finish_frame(q, n_a.squared_norm() > 0.0 ? n_a.normalized()
                                                                 : Vec3{0, 0, 1},
                                     n_a, true);
            }
            frames.push_back(frame);
            continue;
        }
        np.clear();
        nn.clear();
        for (std::uint32_t i : hits) {
            np.push_back(positions[i]);
            nn.push_back(normals[i]);
        }
        frames.push_back(estimate_frame(q, np, nn));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// gather tables and signals
// ---------------------------------------------------------------------------

GatherTable precompute_gather(const std::vector<Vec3>& queries,
                              const std::vector<TangentFrame>& frames,
                              const SpatialIndex& index, double radius,
                              std::uint32_t extent) {
    if (extent % 2 == 0 || extent == 0)
        throw Error("tangent image extent must be odd and positive");
    if (queries.size() != frames.size())
        throw Error("queries/frames size mismatch");
    if (radius <= 0.0) throw Error("gather radius must be positive");

    GatherTable table;
    table.extent = extent;
    table.radius = radius;
    table.num_locations = queries.size();
    const std::size_t pixels = table.pixels();
    table.pixel_offsets.assign(queries.size() * pixels + 1, 0);

    const double pixel_size = 2.0 * radius / static_cast<double>(extent);
    std::vector<std::uint32_t> hits;
    std::vector<std::vector<std::uint32_t>> bins(pixels);

    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const TangentFrame& frame = frames[qi];
        index.radius_query(queries[qi], radius, hits);
        for (auto& b : bins) b.clear();
        for (std::uint32_t src : hits) {
            Vec3 d = index.position(src) - frame.origin;
            double a = d.dot(frame.u);
            double b = d.dot(frame.v);
            auto bin1 = [&](double t) {
                auto c = static_cast<std::int64_t>(std::floor((t + radius) / pixel_size));
                if (c < 0) c = 0;
                if (c >= extent) c = extent - 1;
                return static_cast<std::uint32_t>(c);
            };
            bins[bin1(b) * extent + bin1(a)].push_back(src);
        }
        for (std::size_t p = 0; p < pixels; ++p) {
            const auto& bin = bins[p];
            double w = bin.empty() ? 0.0 : 1.0 / static_cast<double>(bin.size());
            for (std::uint32_t src : bin) table.entries.push_back({src, w});
            table.pixel_offsets[qi * pixels + p + 1] =
                table.pixel_offsets[qi * pixels + p] + bin.size();
        }
    }
    return table;
}

SignalImage compute_signals(const GatherTable& table,
                            const std::vector<TangentFrame>& frames,
                            const std::vector<Vec3>& source_positions,
                            const std::vector<Vec3>& source_normals) {
    if (frames.size() != table.num_locations)
        throw Error("frames/table size mismatch");
    SignalImage image;
    image.extent = table.extent;
    image.channels = 4;
    image.num_locations = table.num_locations;
    const std::size_t pixels = table.pixels();
    image.data.assign(table.num_locations * pixels * 4, 0.0);

    for (std::size_t qi = 0; qi < table.num_locations; ++qi) {
        const TangentFrame& frame = frames[qi];
        for (std::size_t p = 0; p < pixels; ++p) {
            std::uint64_t begin = table.pixel_offsets[qi * pixels + p];
            std::uint64_t end = table.pixel_offsets[qi * pixels + p + 1];
            double d = 0.0, nu = 0.0, nv = 0.0, nw = 0.0;
            for (std::uint64_t e = begin; e < end; ++e) {
                const auto& entry = table.entries[e];
                const Vec3& sp = source_positions[entry.source];
                const Vec3& sn = source_normals[entry.source];
                d += entry.weight * (sp - frame.origin).dot(frame.normal);
                nu += entry.weight * sn.dot(frame.u);
                nv += entry.weight * sn.dot(frame.v);
                nw += entry.weight * sn.dot(frame.normal);
            }
            double* px = &image.data[(qi * pixels + p) * 4];
            px[0] = d;
            px[1] = nu;
            px[2] = nv;
            px[3] = nw;
        }
    }
    return image;
}

// ---------------------------------------------------------------------------
// grid-hash pyramid
// ---------------------------------------------------------------------------

namespace {

// groups by integer cell key (sorted for a deterministic coarse ordering),
// representatives are member centroids, members summed in input order;
// optionally reports each representative's cell so coarser levels can nest
// by integer halving instead of re-flooring centroids
PyramidLevel hash_level(const std::vector<Vec3>& fine_positions,
                        const std::vector<std::array<std::int64_t, 3>>& cells,
                        std::vector<std::array<std::int64_t, 3>>* rep_cells = nullptr) {
    std::vector<std::uint64_t> keys(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        keys[i] = morton_encode(static_cast<std::uint32_t>(cells[i][0]),
                                static_cast<std::uint32_t>(cells[i][1]),
                                static_cast<std::uint32_t>(cells[i][2]));

    std::vector<std::uint64_t> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::unordered_map<std::uint64_t, std::uint32_t> cell_index;
    cell_index.reserve(sorted.size() * 2);
    for (std::uint32_t i = 0; i < sorted.size(); ++i) cell_index.emplace(sorted[i], i);

    PyramidLevel level;
    level.pool_from_prev.resize(fine_positions.size());
    level.positions.assign(sorted.size(), Vec3{0, 0, 0});
    std::vector<std::uint32_t> counts(sorted.size(), 0);
    for (std::size_t i = 0; i < fine_positions.size(); ++i) {
        std::uint32_t c = cell_index.at(keys[i]);
        level.pool_from_prev[i] = c;
        level.positions[c] += fine_positions[i];
        ++counts[c];
    }
    for (std::size_t c = 0; c < level.positions.size(); ++c)
        level.positions[c] = level.positions[c] / static_cast<double>(counts[c]);
    if (rep_cells) {
        rep_cells->resize(sorted.size());
        for (std::uint32_t i = 0; i < sorted.size(); ++i) {
            auto d = morton_decode(sorted[i]);
            (*rep_cells)[i] = {static_cast<std::int64_t>(d[0]),
                               static_cast<std::int64_t>(d[1]),
                               static_cast<std::int64_t>(d[2])};
        }
    }
    return level;
}

std::vector<std::array<std::int64_t, 3>> point_cells(const std::vector<Vec3>& pts,
                                                     int k) {
    const double scale = static_cast<double>(1u << k);
    std::vector<std::array<std::int64_t, 3>> cells(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            double c = std::floor(pts[i][a] * scale);
            if (c < 0.0) c = 0.0;
            if (c >= scale) c = scale - 1.0;
            cells[i][a] = static_cast<std::int64_t>(c);
        }
    return cells;
}

}  // namespace

double ScalePyramid::point_cell_size(int scale) const {
    return 1.0 / static_cast<double>(1u << (depth + 3 - scale));  // D+2, D+1, D
}

double ScalePyramid::vertex_cell_size(int scale) const {
    return 1.0 / static_cast<double>(1u << (depth + 1 - scale));  // D, D-1, D-2
}

ScalePyramid build_pyramid(const std::vector<Vec3>& point_positions,
                           const std::vector<Vec3>& vertex_positions,
                           const std::vector<std::array<std::uint32_t, 3>>& vertex_lattice,
                           int depth) {
    if (depth < 3)
        throw DepthTooShallow("pyramid needs depth >= 3, got " + std::to_string(depth));
    if (vertex_positions.size() != vertex_lattice.size())
        throw Error("vertex positions/lattice size mismatch");

    ScalePyramid pyramid;
    pyramid.depth = depth;

    // point levels: raw -> 1/2^(D+2) -> 1/2^(D+1) -> 1/2^D. Coarser cells are
    // the fine cell keys halved, so membership never depends on centroid
    // rounding; grids nest exactly.
    std::vector<std::array<std::int64_t, 3>> rep_cells;
    auto cells1 = point_cells(point_positions, depth + 2);
    pyramid.point_levels.push_back(hash_level(point_positions, cells1, &rep_cells));
    for (int s = 2; s <= 3; ++s) {
        const auto& prev = pyramid.point_levels.back();
        std::vector<std::array<std::int64_t, 3>> halved(rep_cells.size());
        for (std::size_t i = 0; i < rep_cells.size(); ++i)
            for (int a = 0; a < 3; ++a) halved[i][a] = rep_cells[i][a] >> 1;
        std::vector<std::array<std::int64_t, 3>> next_cells;
        pyramid.point_levels.push_back(hash_level(prev.positions, halved, &next_cells));
        rep_cells = std::move(next_cells);
    }

    // vertex levels 2 and 3 from exact lattice coordinates: at depth D the
    // vertex at lattice i sits at i/2^D, so the 1/2^(D-1) cell is i >> 1
    {
        std::vector<std::array<std::int64_t, 3>> cells(vertex_lattice.size());
        for (std::size_t i = 0; i < vertex_lattice.size(); ++i)
            for (int a = 0; a < 3; ++a) cells[i][a] = vertex_lattice[i][a] >> 1;
        std::vector<std::array<std::int64_t, 3>> cells2_reps;
        pyramid.vertex_levels.push_back(
            hash_level(vertex_positions, cells, &cells2_reps));

        const auto& level2 = pyramid.vertex_levels.back();
        std::vector<std::array<std::int64_t, 3>> cells3(cells2_reps.size());
        for (std::size_t i = 0; i < cells2_reps.size(); ++i)
            for (int a = 0; a < 3; ++a) cells3[i][a] = cells2_reps[i][a] >> 1;
        pyramid.vertex_levels.push_back(hash_level(level2.positions, cells3));
    }
    return pyramid;
}

// ---------------------------------------------------------------------------
// gather table cache
// ---------------------------------------------------------------------------

namespace {
constexpr char kGatherMagic[4] = {'S', 'R', 'G', 'T'};
constexpr std::uint32_t kGatherVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw MalformedFile(path + ": truncated gather table");
}
}  // namespace

void save_gather_table(const GatherTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.write(kGatherMagic, 4);
    write_pod(out, kGatherVersion);
    write_pod(out, table.extent);
    write_pod(out, table.radius);
    write_pod(out, static_cast<std::uint64_t>(table.num_locations));
    write_pod(out, static_cast<std::uint64_t>(table.entries.size()));
    out.write(reinterpret_cast<const char*>(table.pixel_offsets.data()),
              static_cast<std::streamsize>(table.pixel_offsets.size() * 8));
    for (const auto& e : table.entries) {
        write_pod(out, e.source);
        write_pod(out, e.weight);
    }
    if (!out) throw IoFailure("write failed for " + path);
}

GatherTable load_gather_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kGatherMagic, 4) != 0)
        throw MalformedFile(path + ": bad gather table magic");
    std::uint32_t version;
    read_pod(in, version, path);
    if (version != kGatherVersion)
        throw VersionMismatch(path + ": gather table version " +
                              std::to_string(version));
    GatherTable table;
    read_pod(in, table.extent, path);
    read_pod(in, table.radius, path);
    std::uint64_t locations, entry_count;
    read_pod(in, locations, path);
    read_pod(in, entry_count, path);
    table.num_locations = locations;
    table.pixel_offsets.resize(locations * table.pixels() + 1);
    if (!in.read(reinterpret_cast<char*>(table.pixel_offsets.data()),
                 static_cast<std::streamsize>(table.pixel_offsets.size() * 8)))
        throw MalformedFile(path + ": truncated gather table offsets");
    table.entries.resize(entry_count);
    for (auto& e : table.entries) {
        read_pod(in, e.source, path);
        read_pod(in, e.weight, path);
    }
    return table;
}

}  // namespace surfrec
