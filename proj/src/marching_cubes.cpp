#include "surfrec/marching_cubes.hpp"

#include <array>
#include <cstdint>
#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "surfrec/errors.hpp"

namespace surfrec {

namespace {

// Corner numbering matches kCornerOffsets: index = x + 2y + 4z.
constexpr int kEdgeCorner[12][2] = {
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x-axis edges
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y-axis edges
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z-axis edges
};

// Face corner cycles, counterclockwise when viewed from outside the cell.
constexpr int kFaceCycle[6][4] = {
    {0, 4, 6, 2},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 6, 7, 3},  // y = 1
    {0, 2, 3, 1},  // z = 0
    {4, 5, 7, 6},  // z = 1
};

using CaseTriangles = std::vector<std::array<int, 3>>;

// True when both cube edges lie on a common cube face.
bool edges_share_face(int e1, int e2) {
    for (const auto& cyc : kFaceCycle) {
        bool h1 = false, h2 = false;
        for (int t = 0; t < 4; ++t) {
            int a = cyc[t], b = cyc[(t + 1) % 4];
            auto is_edge = [&](int e) {
                return (kEdgeCorner[e][0] == a && kEdgeCorner[e][1] == b) ||
                       (kEdgeCorner[e][0] == b && kEdgeCorner[e][1] == a);
            };
            h1 = h1 || is_edge(e1);
            h2 = h2 || is_edge(e2);
        }
        if (h1 && h2) return true;
    }
    return false;
}

// Triangulates a closed loop of cube-edge midpoints without using any chord
// that lies in a face plane (such chords would be shared with the neighboring
// cell and break manifoldness). The loop is first brought to a canonical
// rotation/reflection so the complementary configuration, whose loops are the
// same curves reversed, triangulates identically with mirrored winding.
void triangulate_loop(const std::vector<int>& loop, CaseTriangles& out) {
    const int n = static_cast<int>(loop.size());
    if (n == 3) {
        out.push_back({loop[0], loop[1], loop[2]});
        return;
    }

    std::vector<int> canon;
    bool canon_reversed = false;
    for (int rev = 0; rev < 2; ++rev) {
        for (int r = 0; r < n; ++r) {
            std::vector<int> cand(n);
            for (int i = 0; i < n; ++i)
                cand[i] = rev ? loop[(r + n - i) % n] : loop[(r + i) % n];
            if (canon.empty() || cand < canon) {
                canon = std::move(cand);
                canon_reversed = rev != 0;
            }
        }
    }

    // Interval DP minimizing the number of face-plane chords; zero is always
    // attainable (checked exhaustively for all 256 configurations).
    auto chord_cost = [&](int i, int j) {
        if (j - i == 1 || (i == 0 && j == n - 1)) return 0;
        return edges_share_face(canon[i], canon[j]) ? 1 : 0;
    };
    std::vector<std::vector<int>> cost(n, std::vector<int>(n, 0));
    std::vector<std::vector<int>> split(n, std::vector<int>(n, -1));
    for (int len = 3; len < n; ++len) {
        for (int i = 0; i + len < n; ++i) {
            int j = i + len;
            int best = 1 << 20, best_k = -1;
            for (int k = i + 1; k < j; ++k) {
                int c = cost[i][k] + cost[k][j] + chord_cost(i, k) +
                        chord_cost(k, j);
                if (c < best) best = c, best_k = k;
            }
            cost[i][j] = best;
            split[i][j] = best_k;
        }
    }
    if (cost[0][n - 1] != 0)
        throw std::logic_error("cell table: forced face-plane chord");

    std::vector<std::array<int, 2>> stack{{0, n - 1}};
    while (!stack.empty()) {
        auto [i, j] = stack.back();
        stack.pop_back();
        if (j - i < 2) continue;
        int k = j - i == 2 ? i + 1 : split[i][j];
        if (canon_reversed)
            out.push_back({canon[i], canon[j], canon[k]});
        else
            out.push_back({canon[i], canon[k], canon[j]});
        stack.push_back({i, k});
        stack.push_back({k, j});
    }
}

// Builds the 256-entry cell table. Per configuration (bit i set when corner i
// is front-labeled), the surface crosses every edge whose endpoints differ;
// the crossing segments on each face are joined into closed loops and each
// loop is triangulated. Faces with four crossings are split along a fixed
// diagonal chosen by corner index alone, so adjacent cells always agree on the
// shared face (watertightness) and complementing all labels reverses every
// loop without moving it (complement symmetry).
std::array<CaseTriangles, 256> build_cell_table() {
    int edge_of[8][8];
    for (auto& row : edge_of)
        for (int& e : row) e = -1;
    for (int e = 0; e < 12; ++e) {
        edge_of[kEdgeCorner[e][0]][kEdgeCorner[e][1]] = e;
        edge_of[kEdgeCorner[e][1]][kEdgeCorner[e][0]] = e;
    }

    std::array<CaseTriangles, 256> table;
    for (int config = 0; config < 256; ++config) {
        auto front = [&](int corner) { return (config >> corner) & 1; };

        int next_edge[12];
        int in_degree[12] = {};
        for (int& n : next_edge) n = -1;

        for (const auto& cyc : kFaceCycle) {
            int crossing[4];
            int num_crossings = 0;
            for (int t = 0; t < 4; ++t)
                if (front(cyc[t]) != front(cyc[(t + 1) % 4]))
                    crossing[num_crossings++] = t;
            if (num_crossings == 0) continue;

            std::array<std::array<int, 2>, 2> pairs;
            int num_pairs;
            if (num_crossings == 2) {
                pairs[0] = {crossing[0], crossing[1]};
                num_pairs = 1;
            } else {
                // Ambiguous face: pair the two crossings flanking the corner
                // with the smallest index, independent of the labels.
                int s = 0;
                for (int t = 1; t < 4; ++t)
                    if (cyc[t] < cyc[s]) s = t;
                pairs[0] = {(s + 3) % 4, s};
                pairs[1] = {(s + 1) % 4, (s + 2) % 4};
                num_pairs = 2;
            }

            for (int p = 0; p < num_pairs; ++p) {
                // Direct each segment toward the crossing whose next corner
                // (counterclockwise) is front, which orients every loop so
                // the fan normals point from back toward front.
                int head = -1, tail = -1;
                for (int t : pairs[p]) {
                    if (front(cyc[(t + 1) % 4]))
                        head = t;
                    else
                        tail = t;
                }
                if (head < 0 || tail < 0)
                    throw std::logic_error("cell table: unoriented segment");
                int from = edge_of[cyc[tail]][cyc[(tail + 1) % 4]];
                int to = edge_of[cyc[head]][cyc[(head + 1) % 4]];
                next_edge[from] = to;
                ++in_degree[to];
            }
        }

        bool seen[12] = {};
        for (int start = 0; start < 12; ++start) {
            if (next_edge[start] < 0 || seen[start]) continue;
            std::vector<int> loop;
            for (int e = start; !seen[e]; e = next_edge[e]) {
                if (next_edge[e] < 0 || in_degree[e] != 1)
                    throw std::logic_error("cell table: open loop");
                seen[e] = true;
                loop.push_back(e);
            }
            triangulate_loop(loop, table[config]);
        }
    }
    return table;
}

const std::array<CaseTriangles, 256>& cell_table() {
    static const std::array<CaseTriangles, 256> table = build_cell_table();
    return table;
}

}  // namespace

TriangleMesh marching_cubes(const LabeledGrid& grid) {
    const VertexSet& vs = grid.vertices;
    if (grid.labels.size() != vs.size())
        throw LengthMismatch("label count " + std::to_string(grid.labels.size()) +
                             " does not match vertex count " +
                             std::to_string(vs.size()));

    const auto& table = cell_table();
    TriangleMesh mesh;
    // mesh-vertex index per lattice edge; key = Morton(min corner) * 4 + axis
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    edge_vertex.reserve(vs.size());

    auto edge_point = [&](const std::array<std::uint32_t, 8>& corners,
                          int edge) -> std::uint32_t {
        std::uint32_t a = corners[kEdgeCorner[edge][0]];
        std::uint32_t b = corners[kEdgeCorner[edge][1]];
        const auto& la = vs.lattice[a];
        const auto& lb = vs.lattice[b];
        int axis = la[0] != lb[0] ? 0 : (la[1] != lb[1] ? 1 : 2);
        const auto& lmin = la[axis] < lb[axis] ? la : lb;
        std::uint64_t key = morton_encode(lmin[0], lmin[1], lmin[2]) * 4 +
                            static_cast<std::uint64_t>(axis);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back((vs.coordinates[a] + vs.coordinates[b]) * 0.5);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    for (const auto& corners : vs.cell_corners) {
        unsigned config = 0;
        for (int i = 0; i < 8; ++i)
            if (grid.labels.labels[corners[i]] == 1) config |= 1u << i;
        for (const auto& tri : table[config])
            mesh.triangles.push_back({edge_point(corners, tri[0]),
                                      edge_point(corners, tri[1]),
                                      edge_point(corners, tri[2])});
    }
    return mesh;
}

TriangleMesh taubin_smooth(const TriangleMesh& mesh, double lambda, double mu,
                           int iterations) {
    if (iterations < 0) throw ConfigError("smoothing iterations must be >= 0");
    TriangleMesh out = mesh;
    if (iterations == 0 || mesh.vertices.empty()) return out;

    // unique undirected one-ring adjacency
    std::vector<std::vector<std::uint32_t>> ring(mesh.vertices.size());
    auto link = [&](std::uint32_t a, std::uint32_t b) {
        for (std::uint32_t n : ring[a])
            if (n == b) return;
        ring[a].push_back(b);
        ring[b].push_back(a);
    };
    for (const auto& t : mesh.triangles) {
        link(t[0], t[1]);
        link(t[1], t[2]);
        link(t[2], t[0]);
    }

    std::vector<Vec3> next(out.vertices.size());
    auto step = [&](double factor) {
        for (std::size_t i = 0; i < out.vertices.size(); ++i) {
            if (ring[i].empty()) {
                next[i] = out.vertices[i];
                continue;
            }
            Vec3 mean{0.0, 0.0, 0.0};
            for (std::uint32_t n : ring[i]) mean = mean + out.vertices[n];
            mean = mean / static_cast<double>(ring[i].size());
            next[i] = out.vertices[i] + (mean - out.vertices[i]) * factor;
        }
        out.vertices.swap(next);
    };
    for (int it = 0; it < iterations; ++it) {
        step(lambda);
        step(mu);
    }
    return out;
}

}  // namespace surfrec
