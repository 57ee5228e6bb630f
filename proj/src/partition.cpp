#include "surfrec/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "surfrec/errors.hpp"

namespace surfrec {

double default_partition_pad(int depth) {
    double r0 = 4.0 / static_cast<double>(1u << depth);
    double coarse_diag = std::sqrt(3.0) / static_cast<double>(1u << (depth - 2));
    return r0 * (1.0 + 2.0 + 4.0) + coarse_diag;
}

namespace {

struct Splitter {
    const VertexSet& vertices;
    const OrientedPointCloud& cloud;
    std::size_t max_batch;
    double pad;
    int depth;
    std::vector<Part> parts;

    std::size_t count_points(const Box3& padded) const {
        const double scale = static_cast<double>(1u << depth);
        std::int64_t clo[3], chi[3];
        for (int a = 0; a < 3; ++a) {
            clo[a] = static_cast<std::int64_t>(std::floor(padded.lo[a] * scale));
            chi[a] = static_cast<std::int64_t>(std::floor(padded.hi[a] * scale));
        }
        std::size_t n = 0;
        for (const Vec3& p : cloud.positions) {
            bool inside = true;
            for (int a = 0; a < 3 && inside; ++a) {
                auto c = static_cast<std::int64_t>(std::floor(p[a] * scale));
                if (c < clo[a] || c > chi[a]) inside = false;
            }
            if (inside) ++n;
        }
        return n;
    }

    void split(std::vector<std::uint32_t>& verts, const Box3& box, int forced_levels) {
        Box3 padded = box.padded(pad).clipped_to_unit_cube();
        std::size_t point_count = forced_levels > 0 ? 0 : count_points(padded);
        bool fits = verts.size() <= max_batch && point_count <= max_batch;

        if (forced_levels <= 0 && fits) {
            emit(std::move(verts), box, padded);
            return;
        }

        // longest-axis median split on vertex positions
        Box3 tight;
        for (std::uint32_t v : verts) tight.expand(vertices.coordinates[v]);
        int axis = 0;
        tight.longest_extent(&axis);
        if (tight.extent()[axis] <= 0.0) {
            if (forced_levels > 0) {
                // cannot force further splits of coincident vertices
                emit(std::move(verts), box, padded);
                return;
            }
            throw UnsatisfiableCap(
                "region around (" + std::to_string(tight.lo.x) + ", " +
                std::to_string(tight.lo.y) + ", " + std::to_string(tight.lo.z) +
                ") cannot satisfy max_batch=" + std::to_string(max_batch) +
                ": vertices=" + std::to_string(verts.size()) +
                " padded points=" + std::to_string(point_count));
        }
        if (verts.size() <= 1 && forced_levels <= 0) {
            throw UnsatisfiableCap(
                "a single vertex's padded neighborhood at (" +
                std::to_string(vertices.coordinates[verts[0]].x) + ", " +
                std::to_string(vertices.coordinates[verts[0]].y) + ", " +
                std::to_string(vertices.coordinates[verts[0]].z) + ") holds " +
                std::to_string(point_count) + " points > max_batch=" +
                std::to_string(max_batch));
        }

        std::vector<std::uint32_t> sorted = verts;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                         sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
                             double ca = vertices.coordinates[a][axis];
                             double cb = vertices.coordinates[b][axis];
                             if (ca != cb) return ca < cb;
                             return a < b;
                         });
        double split_value =
            vertices.coordinates[sorted[sorted.size() / 2]][axis];
        if (split_value <= tight.lo[axis]) {
            // median coincides with the minimum; use the smallest larger value
            double next = tight.hi[axis];
            for (std::uint32_t v : verts) {
                double c = vertices.coordinates[v][axis];
                if (c > tight.lo[axis] && c < next) next = c;
            }
            split_value = next;
        }

        std::vector<std::uint32_t> low, high;
        low.reserve(verts.size() / 2 + 1);
        high.reserve(verts.size() / 2 + 1);
        for (std::uint32_t v : verts) {
            // half-open boxes: boundary-coincident vertices go to the lower box
            // boundary of the SPLIT goes to the upper side ([lo, split) | [split, hi))
            if (vertices.coordinates[v][axis] < split_value)
                low.push_back(v);
            else
                high.push_back(v);
        }
        verts.clear();
        verts.shrink_to_fit();

        Box3 low_box = box, high_box = box;
        low_box.hi[axis] = split_value;
        high_box.lo[axis] = split_value;
        split(low, low_box, forced_levels - 1);
        split(high, high_box, forced_levels - 1);
    }

    void emit(std::vector<std::uint32_t> verts, const Box3& box, const Box3& padded) {
        Part part;
        part.part_id = static_cast<std::uint32_t>(parts.size());
        part.vertex_box = box;
        part.vertex_indices = std::move(verts);
        std::sort(part.vertex_indices.begin(), part.vertex_indices.end());

        // cell-aligned point box
        const double scale = static_cast<double>(1u << depth);
        std::int64_t clo[3], chi[3];
        for (int a = 0; a < 3; ++a) {
            clo[a] = static_cast<std::int64_t>(std::floor(padded.lo[a] * scale));
            chi[a] = static_cast<std::int64_t>(std::floor(padded.hi[a] * scale));
            part.point_box.lo[a] = static_cast<double>(clo[a]) / scale;
            part.point_box.hi[a] = static_cast<double>(chi[a] + 1) / scale;
        }
        for (std::uint32_t i = 0; i < cloud.size(); ++i) {
            bool inside = true;
            for (int a = 0; a < 3 && inside; ++a) {
                auto c = static_cast<std::int64_t>(std::floor(cloud.positions[i][a] * scale));
                if (c < clo[a] || c > chi[a]) inside = false;
            }
            if (inside) part.point_indices.push_back(i);
        }

        // coarse vertex-cell closure (cells of size 1/2^(D-2), lattice >> 2)
        std::unordered_set<std::uint64_t> owned_cells;
        std::vector<bool> owned(vertices.size(), false);
        for (std::uint32_t v : part.vertex_indices) {
            owned[v] = true;
            const auto& lat = vertices.lattice[v];
            owned_cells.insert(morton_encode(lat[0] >> 2, lat[1] >> 2, lat[2] >> 2));
        }
        for (std::uint32_t v = 0; v < vertices.size(); ++v) {
            if (owned[v]) continue;
            const auto& lat = vertices.lattice[v];
            if (owned_cells.count(morton_encode(lat[0] >> 2, lat[1] >> 2, lat[2] >> 2)))
                part.halo_vertex_indices.push_back(v);
        }
        parts.push_back(std::move(part));
    }
};

}  // namespace

std::vector<Part> partition(const VertexSet& vertices,
                            const OrientedPointCloud& cloud,
                            const PartitionConfig& cfg) {
    if (vertices.size() == 0) throw Error("cannot partition an empty vertex set");
    if (cfg.max_batch == 0) throw Error("max_batch must be positive");

    Splitter splitter{vertices, cloud,
                      cfg.max_batch,
                      cfg.pad > 0.0 ? cfg.pad : default_partition_pad(vertices.depth),
                      vertices.depth,
                      {}};

    // root box: half-open box covering every vertex
    Box3 root;
    for (const Vec3& p : vertices.coordinates) root.expand(p);
    double eps = 0.5 / static_cast<double>(1u << vertices.depth);
    for (int a = 0; a < 3; ++a) root.hi[a] += eps;

    int forced_levels = 0;
    while ((1u << forced_levels) < cfg.force_parts) ++forced_levels;

    std::vector<std::uint32_t> all(vertices.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    splitter.split(all, root, forced_levels);
    return std::move(splitter.parts);
}

std::vector<std::uint8_t> merge_labels(
    const std::vector<Part>& parts,
    const std::vector<std::vector<std::uint8_t>>& per_part_labels,
    std::size_t vertex_count) {
    if (parts.size() != per_part_labels.size())
        throw LengthMismatch("parts/labels count mismatch");
    std::vector<std::uint8_t> merged(vertex_count, 255);
    for (std::size_t j = 0; j < parts.size(); ++j) {
        const Part& part = parts[j];
        const auto& labels = per_part_labels[j];
        if (labels.size() != part.vertex_indices.size())
            throw LengthMismatch("part " + std::to_string(j) + " has " +
                                 std::to_string(labels.size()) + " labels for " +
                                 std::to_string(part.vertex_indices.size()) +
                                 " vertices");
        for (std::size_t i = 0; i < labels.size(); ++i)
            merged[part.vertex_indices[i]] = labels[i];
    }
    for (std::size_t v = 0; v < vertex_count; ++v)
        if (merged[v] == 255)
            throw CoverageGap("vertex " + std::to_string(v) + " owned by no part");
    return merged;
}

void dump_parts(const std::vector<Part>& parts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.precision(17);
    for (const Part& p : parts) {
        out << "part " << p.part_id << "\n";
        out << "  vertex_box " << p.vertex_box.lo.x << ' ' << p.vertex_box.lo.y
            << ' ' << p.vertex_box.lo.z << "  " << p.vertex_box.hi.x << ' '
            << p.vertex_box.hi.y << ' ' << p.vertex_box.hi.z << "\n";
        out << "  point_box " << p.point_box.lo.x << ' ' << p.point_box.lo.y << ' '
            << p.point_box.lo.z << "  " << p.point_box.hi.x << ' '
            << p.point_box.hi.y << ' ' << p.point_box.hi.z << "\n";
        out << "  vertices " << p.vertex_indices.size() << " halo "
            << p.halo_vertex_indices.size() << " points " << p.point_indices.size()
            << "\n";
    }
}

}  // namespace surfrec
