#include "surfrec/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "surfrec/analytic.hpp"
#include "surfrec/errors.hpp"
#include "surfrec/kdtree.hpp"
#include "surfrec/labeling.hpp"
#include "surfrec/marching_cubes.hpp"
#include "surfrec/mesh_io.hpp"
#include "surfrec/tangent.hpp"

namespace fs = std::filesystem;

namespace surfrec {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

double PipelineConfig::scale_radius(int s) const {
    if (s < 1 || s > 3) throw ConfigError("scale must be 1, 2, or 3");
    return static_cast<double>(1u << (s - 1)) * base_radius_cells /
           static_cast<double>(1u << depth);
}

Hyperparameters PipelineConfig::hyperparameters() const {
    Hyperparameters h;
    h.depth = depth;
    h.extent = extent;
    h.signal_channels = 4;
    h.w1 = w1;
    h.w2 = w2;
    h.w3 = w3;
    h.activation_slope = activation_slope;
    return h;
}

PartitionConfig PipelineConfig::partition_config() const {
    return {max_batch, pad, force_parts};
}

namespace {

void validate_config(const PipelineConfig& c) {
    if (c.depth < 3 || c.depth > 12)
        throw ConfigError("octree.depth must be in [3, 12]");
    if (c.normalize_padding < 0.0 || c.normalize_padding >= 0.5)
        throw ConfigError("octree.normalize_padding must be in [0, 0.5)");
    if (c.max_batch == 0) throw ConfigError("partition.max_batch must be positive");
    if (c.force_parts == 0)
        throw ConfigError("partition.force_parts must be positive");
    if (c.extent < 1 || c.extent % 2 == 0)
        throw ConfigError("tangent.extent must be odd and positive");
    if (c.base_radius_cells <= 0.0)
        throw ConfigError("tangent.base_radius_cells must be positive");
    if (c.baseline_radius_cells <= 0.0)
        throw ConfigError("tangent.baseline_radius_cells must be positive");
    if (c.w1 == 0 || c.w2 == 0 || c.w3 == 0)
        throw ConfigError("network widths must be positive");
    if (c.step_size <= 0.0) throw ConfigError("train.step_size must be positive");
    if (c.iterations < 0)
        throw ConfigError("smoothing.iterations must be >= 0");
    if (c.workers < 0) throw ConfigError("pipeline.workers must be >= 0");
    if (c.samples == 0) throw ConfigError("evaluate.samples must be positive");
}

template <typename T>
T parse_number(const std::string& section, const std::string& key,
               const std::string& value) {
    std::istringstream is(value);
    T out;
    is >> out;
    std::string rest;
    if (is.fail() || (is >> rest, !rest.empty()))
        throw ConfigError("[" + section + "] " + key + ": cannot parse '" +
                          value + "'");
    return out;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    PipelineConfig cfg;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fail = [&](const std::string& what) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + what);
        };
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        if (key.empty() || value.empty()) fail("expected key = value");

        std::string full = section + "." + key;
        if (full == "octree.depth") cfg.depth = parse_number<int>(section, key, value);
        else if (full == "octree.normalize_padding") cfg.normalize_padding = parse_number<double>(section, key, value);
        else if (full == "partition.max_batch") cfg.max_batch = parse_number<std::size_t>(section, key, value);
        else if (full == "partition.pad") cfg.pad = parse_number<double>(section, key, value);
        else if (full == "partition.force_parts") cfg.force_parts = parse_number<std::uint32_t>(section, key, value);
        else if (full == "tangent.extent") cfg.extent = parse_number<std::uint32_t>(section, key, value);
        else if (full == "tangent.base_radius_cells") cfg.base_radius_cells = parse_number<double>(section, key, value);
        else if (full == "tangent.baseline_radius_cells") cfg.baseline_radius_cells = parse_number<double>(section, key, value);
        else if (full == "network.w1") cfg.w1 = parse_number<std::uint32_t>(section, key, value);
        else if (full == "network.w2") cfg.w2 = parse_number<std::uint32_t>(section, key, value);
        else if (full == "network.w3") cfg.w3 = parse_number<std::uint32_t>(section, key, value);
        else if (full == "network.activation_slope") cfg.activation_slope = parse_number<double>(section, key, value);
        else if (full == "network.init_seed") cfg.init_seed = parse_number<std::uint64_t>(section, key, value);
        else if (full == "train.steps") cfg.steps = parse_number<std::size_t>(section, key, value);
        else if (full == "train.step_size") cfg.step_size = parse_number<double>(section, key, value);
        else if (full == "train.seed") cfg.train_seed = parse_number<std::uint64_t>(section, key, value);
        else if (full == "train.checkpoint_interval") cfg.checkpoint_interval = parse_number<std::size_t>(section, key, value);
        else if (full == "smoothing.lambda") cfg.lambda = parse_number<double>(section, key, value);
        else if (full == "smoothing.mu") cfg.mu = parse_number<double>(section, key, value);
        else if (full == "smoothing.iterations") cfg.iterations = parse_number<int>(section, key, value);
        else if (full == "pipeline.workers") cfg.workers = parse_number<int>(section, key, value);
        else if (full == "pipeline.seed") cfg.seed = parse_number<std::uint64_t>(section, key, value);
        else if (full == "evaluate.samples") cfg.samples = parse_number<std::size_t>(section, key, value);
        else fail("unknown configuration key '" + full + "'");
    }
    validate_config(cfg);
    return cfg;
}

std::string canonical_config(const PipelineConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "[octree]\ndepth = " << c.depth
       << "\nnormalize_padding = " << c.normalize_padding
       << "\n[partition]\nmax_batch = " << c.max_batch << "\npad = " << c.pad
       << "\nforce_parts = " << c.force_parts
       << "\n[tangent]\nextent = " << c.extent
       << "\nbase_radius_cells = " << c.base_radius_cells
       << "\nbaseline_radius_cells = " << c.baseline_radius_cells
       << "\n[network]\nw1 = " << c.w1 << "\nw2 = " << c.w2 << "\nw3 = " << c.w3
       << "\nactivation_slope = " << c.activation_slope
       << "\ninit_seed = " << c.init_seed << "\n[train]\nsteps = " << c.steps
       << "\nstep_size = " << c.step_size << "\nseed = " << c.train_seed
       << "\ncheckpoint_interval = " << c.checkpoint_interval
       << "\n[smoothing]\nlambda = " << c.lambda << "\nmu = " << c.mu
       << "\niterations = " << c.iterations
       << "\n[pipeline]\nworkers = " << c.workers << "\nseed = " << c.seed
       << "\n[evaluate]\nsamples = " << c.samples << "\n";
    return os.str();
}

namespace {

std::uint64_t fnv1a_str(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string provenance_string(const PipelineConfig& cfg) {
    return "config=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed);
}

}  // namespace

std::string config_hash(const PipelineConfig& cfg) {
    // Execution-strategy knobs (worker count and how the scene is split into
    // parts) never affect outputs, so they are excluded from the identity:
    // the same hash names the same labels and mesh regardless of how the run
    // was scheduled.
    PipelineConfig id = cfg;
    id.workers = 0;
    id.max_batch = PipelineConfig{}.max_batch;
    id.pad = PipelineConfig{}.pad;
    id.force_parts = PipelineConfig{}.force_parts;
    std::ostringstream os;
    os << std::hex << fnv1a_str(canonical_config(id));
    return os.str();
}

int resolve_workers(const PipelineConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("SURFREC_WORKERS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// ---------------------------------------------------------------------------
// Per-part precomputation
// ---------------------------------------------------------------------------

PartPrecompute precompute_part(const OrientedPointCloud& cloud,
                               const VertexSet& vertices, const Part& part,
                               const PipelineConfig& cfg) {
    PartPrecompute out;

    // rows: owned + halo merged ascending, so accumulation order inside any
    // complete cell matches a single-part run
    out.row_to_global.resize(part.vertex_indices.size() +
                             part.halo_vertex_indices.size());
    std::merge(part.vertex_indices.begin(), part.vertex_indices.end(),
               part.halo_vertex_indices.begin(), part.halo_vertex_indices.end(),
               out.row_to_global.begin());
    {
        std::size_t o = 0;
        for (std::size_t r = 0; r < out.row_to_global.size(); ++r) {
            if (o < part.vertex_indices.size() &&
                out.row_to_global[r] == part.vertex_indices[o]) {
                out.owned_rows.push_back(static_cast<std::uint32_t>(r));
                ++o;
            }
        }
    }

    std::vector<Vec3> pts, nrm;
    pts.reserve(part.point_indices.size());
    nrm.reserve(part.point_indices.size());
    for (std::uint32_t i : part.point_indices) {
        pts.push_back(cloud.positions[i]);
        nrm.push_back(cloud.normals[i]);
    }

    std::vector<Vec3> vpos(out.row_to_global.size());
    std::vector<std::array<std::uint32_t, 3>> vlat(out.row_to_global.size());
    for (std::size_t r = 0; r < out.row_to_global.size(); ++r) {
        vpos[r] = vertices.coordinates[out.row_to_global[r]];
        vlat[r] = vertices.lattice[out.row_to_global[r]];
    }

    ScalePyramid pyramid = build_pyramid(pts, vpos, vlat, cfg.depth);
    const auto& p1 = pyramid.point_levels[0];
    const auto& p2 = pyramid.point_levels[1];
    const auto& p3 = pyramid.point_levels[2];
    const auto& v2 = pyramid.vertex_levels[0];
    const auto& v3 = pyramid.vertex_levels[1];

    PartInputs& in = out.inputs;
    in.num_vertices = vpos.size();
    in.pool12 = p2.pool_from_prev;
    in.pool23 = p3.pool_from_prev;
    in.n2 = p2.positions.size();
    in.n3 = p3.positions.size();
    in.vpool12 = v2.pool_from_prev;
    in.vpool23 = v3.pool_from_prev;
    in.nv2 = v2.positions.size();
    in.nv3 = v3.positions.size();

    const double r1 = cfg.scale_radius(1);
    const double r2 = cfg.scale_radius(2);
    const double r3 = cfg.scale_radius(3);

    SpatialIndex cloud_index(pts);
    // input signals at the finest point representatives
    auto frames_p1 = estimate_frames(p1.positions, cloud_index, pts, nrm, r1);
    auto signal_table =
        precompute_gather(p1.positions, frames_p1, cloud_index, r1, cfg.extent);
    in.signals = compute_signals(signal_table, frames_p1, pts, nrm);

    // vertex-side gathers: sources are point representatives of the scale
    auto frames_v1 = estimate_frames(vpos, cloud_index, pts, nrm, r1);
    SpatialIndex p1_index(p1.positions);
    in.v1 = precompute_gather(vpos, frames_v1, p1_index, r1, cfg.extent);
    // raw-cloud signals at the vertices themselves: the signed-projection
    // channel carries the vertex's front/back offset, which the gathered
    // point features cannot express
    auto vsignal_table =
        precompute_gather(vpos, frames_v1, cloud_index, r1, cfg.extent);
    in.vertex_signals = compute_signals(vsignal_table, frames_v1, pts, nrm);

    auto frames_v2 =
        estimate_frames(v2.positions, cloud_index, pts, nrm, r2);
    SpatialIndex p2_index(p2.positions);
    in.v2 = precompute_gather(v2.positions, frames_v2, p2_index, r2, cfg.extent);

    auto frames_v3 =
        estimate_frames(v3.positions, cloud_index, pts, nrm, r3);
    SpatialIndex p3_index(p3.positions);
    in.v3 = precompute_gather(v3.positions, frames_v3, p3_index, r3, cfg.extent);

    return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> classify_one_part(const OrientedPointCloud& cloud,
                                            const VertexSet& vertices,
                                            const Part& part,
                                            const PipelineConfig& cfg,
                                            const NetworkState* net) {
    if (net == nullptr) {
        OrientedPointCloud sub;
        sub.positions.reserve(part.point_indices.size());
        sub.normals.reserve(part.point_indices.size());
        for (std::uint32_t i : part.point_indices) {
            sub.positions.push_back(cloud.positions[i]);
            sub.normals.push_back(cloud.normals[i]);
        }
        VertexSet owned;
        owned.depth = vertices.depth;
        owned.coordinates.reserve(part.vertex_indices.size());
        for (std::uint32_t v : part.vertex_indices)
            owned.coordinates.push_back(vertices.coordinates[v]);
        LabelSet ls = baseline_classify(
            owned, sub,
            cfg.baseline_radius_cells / static_cast<double>(1u << cfg.depth));
        return std::move(ls.labels);
    }
    PartPrecompute pre = precompute_part(cloud, vertices, part, cfg);
    std::vector<double> prob = forward(pre.inputs, *net);
    std::vector<std::uint8_t> labels(pre.owned_rows.size());
    for (std::size_t i = 0; i < pre.owned_rows.size(); ++i)
        labels[i] = prob[pre.owned_rows[i]] >= 0.5 ? 1 : 0;
    return labels;
}

}  // namespace

LabelSet classify_parts(const OrientedPointCloud& cloud,
                        const VertexSet& vertices,
                        const std::vector<Part>& parts,
                        const PipelineConfig& cfg, const NetworkState* net) {
    if (net && net->hyper != cfg.hyperparameters())
        throw HyperparameterMismatch(
            "checkpoint hyperparameters disagree with the configuration");

    std::vector<std::vector<std::uint8_t>> results(parts.size());
    int workers = std::min<int>(resolve_workers(cfg),
                                static_cast<int>(parts.size()));
    if (workers <= 1) {
        for (std::size_t j = 0; j < parts.size(); ++j)
            results[j] = classify_one_part(cloud, vertices, parts[j], cfg, net);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (;;) {
                        std::size_t j = next.fetch_add(1);
                        if (j >= parts.size()) break;
                        results[j] =
                            classify_one_part(cloud, vertices, parts[j], cfg, net);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    LabelSet merged;
    merged.labels = merge_labels(parts, results, vertices.size());
    return merged;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

ReconstructionResult reconstruct(const OrientedPointCloud& world_cloud,
                                 const PipelineConfig& cfg,
                                 const NetworkState* net) {
    ReconstructionResult out;
    OrientedPointCloud cloud = world_cloud;
    cloud.validate_and_renormalize();
    out.transform = normalize_cloud(cloud, cfg.normalize_padding);

    Octree octree = build_octree(cloud, cfg.depth);
    VertexSet vertices = extract_finest_vertices(octree);
    std::vector<Part> parts = partition(vertices, cloud, cfg.partition_config());

    out.labels = classify_parts(cloud, vertices, parts, cfg, net);
    out.labels.provenance = provenance_string(cfg);
    out.vertex_count = vertices.size();
    out.part_count = parts.size();

    out.raw_mesh = marching_cubes({octree, vertices, out.labels});
    out.mesh = taubin_smooth(out.raw_mesh, cfg.lambda, cfg.mu, cfg.iterations);
    apply_inverse_transform(out.mesh, out.transform);
    apply_inverse_transform(out.raw_mesh, out.transform);
    return out;
}

// ---------------------------------------------------------------------------
// Train-batch serialization ("SRTB")
// ---------------------------------------------------------------------------

namespace {

constexpr char kBatchMagic[4] = {'S', 'R', 'T', 'B'};
constexpr std::uint32_t kBatchVersion = 1;

template <typename T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const std::string& path) {
    if (pos + sizeof(T) > in.size())
        throw MalformedFile(path + ": truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

template <typename T>
void put_vec(std::string& out, const std::vector<T>& v) {
    put(out, static_cast<std::uint64_t>(v.size()));
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

template <typename T>
std::vector<T> take_vec(const std::string& in, std::size_t& pos,
                        const std::string& path) {
    auto n = take<std::uint64_t>(in, pos, path);
    if (pos + n * sizeof(T) > in.size())
        throw MalformedFile(path + ": truncated array");
    std::vector<T> v(n);
    std::memcpy(v.data(), in.data() + pos, n * sizeof(T));
    pos += n * sizeof(T);
    return v;
}

void put_table(std::string& out, const GatherTable& t) {
    put(out, t.extent);
    put(out, t.radius);
    put(out, static_cast<std::uint64_t>(t.num_locations));
    put_vec(out, t.pixel_offsets);
    put(out, static_cast<std::uint64_t>(t.entries.size()));
    for (const auto& e : t.entries) {
        put(out, e.source);
        put(out, e.weight);
    }
}

GatherTable take_table(const std::string& in, std::size_t& pos,
                       const std::string& path) {
    GatherTable t;
    t.extent = take<std::uint32_t>(in, pos, path);
    t.radius = take<double>(in, pos, path);
    t.num_locations = take<std::uint64_t>(in, pos, path);
    t.pixel_offsets = take_vec<std::uint64_t>(in, pos, path);
    auto n = take<std::uint64_t>(in, pos, path);
    t.entries.resize(n);
    for (auto& e : t.entries) {
        e.source = take<std::uint32_t>(in, pos, path);
        e.weight = take<double>(in, pos, path);
    }
    return t;
}

}  // namespace

void save_train_batch(const TrainBatch& batch, const std::string& provenance,
                      const std::string& path) {
    std::string body;
    body.append(kBatchMagic, 4);
    put(body, kBatchVersion);
    put(body, static_cast<std::uint32_t>(provenance.size()));
    body.append(provenance);

    const PartInputs& in = batch.inputs;
    put(body, in.signals.extent);
    put(body, in.signals.channels);
    put(body, static_cast<std::uint64_t>(in.signals.num_locations));
    put_vec(body, in.signals.data);
    put(body, in.vertex_signals.extent);
    put(body, in.vertex_signals.channels);
    put(body, static_cast<std::uint64_t>(in.vertex_signals.num_locations));
    put_vec(body, in.vertex_signals.data);
    put_vec(body, in.pool12);
    put_vec(body, in.pool23);
    put(body, static_cast<std::uint64_t>(in.n2));
    put(body, static_cast<std::uint64_t>(in.n3));
    put_table(body, in.v1);
    put_table(body, in.v2);
    put_table(body, in.v3);
    put_vec(body, in.vpool12);
    put_vec(body, in.vpool23);
    put(body, static_cast<std::uint64_t>(in.nv2));
    put(body, static_cast<std::uint64_t>(in.nv3));
    put(body, static_cast<std::uint64_t>(in.num_vertices));
    put_vec(body, batch.labels);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoFailure("failed writing " + path);
}

TrainBatch load_train_batch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    std::string body((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    if (body.size() < 8 || std::memcmp(body.data(), kBatchMagic, 4) != 0)
        throw MalformedFile(path + ": bad train batch magic");
    std::size_t pos = 4;
    auto version = take<std::uint32_t>(body, pos, path);
    if (version != kBatchVersion)
        throw VersionMismatch(path + ": unsupported train batch version " +
                              std::to_string(version));
    auto prov_len = take<std::uint32_t>(body, pos, path);
    pos += prov_len;  // provenance is informational

    TrainBatch batch;
    PartInputs& pi = batch.inputs;
    pi.signals.extent = take<std::uint32_t>(body, pos, path);
    pi.signals.channels = take<std::uint32_t>(body, pos, path);
    pi.signals.num_locations = take<std::uint64_t>(body, pos, path);
    pi.signals.data = take_vec<double>(body, pos, path);
    pi.vertex_signals.extent = take<std::uint32_t>(body, pos, path);
    pi.vertex_signals.channels = take<std::uint32_t>(body, pos, path);
    pi.vertex_signals.num_locations = take<std::uint64_t>(body, pos, path);
    pi.vertex_signals.data = take_vec<double>(body, pos, path);
    pi.pool12 = take_vec<std::uint32_t>(body, pos, path);
    pi.pool23 = take_vec<std::uint32_t>(body, pos, path);
    pi.n2 = take<std::uint64_t>(body, pos, path);
    pi.n3 = take<std::uint64_t>(body, pos, path);
    pi.v1 = take_table(body, pos, path);
    pi.v2 = take_table(body, pos, path);
    pi.v3 = take_table(body, pos, path);
    pi.vpool12 = take_vec<std::uint32_t>(body, pos, path);
    pi.vpool23 = take_vec<std::uint32_t>(body, pos, path);
    pi.nv2 = take<std::uint64_t>(body, pos, path);
    pi.nv3 = take<std::uint64_t>(body, pos, path);
    pi.num_vertices = take<std::uint64_t>(body, pos, path);
    batch.labels = take_vec<std::uint8_t>(body, pos, path);
    return batch;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_prepare(const std::string& cloud_path, const std::string& gt_mesh_path,
                 const std::string& out_dir, const PipelineConfig& cfg) {
    // load everything before writing anything (no partial output on error)
    OrientedPointCloud cloud = load_point_cloud(cloud_path);
    TriangleMesh gt = load_mesh(gt_mesh_path);

    NormalizationTransform transform =
        normalize_cloud(cloud, cfg.normalize_padding);
    apply_transform(gt, transform);

    Octree octree = build_octree(cloud, cfg.depth);
    VertexSet vertices = extract_finest_vertices(octree);
    LabelSet labels = label_from_mesh(vertices, gt);
    std::vector<Part> parts = partition(vertices, cloud, cfg.partition_config());

    std::string prov = provenance_string(cfg);
    labels.provenance = prov;

    fs::create_directories(out_dir);
    fs::path dir(out_dir);
    save_point_cloud(cloud, (dir / "cloud.ply").string(), CloudFormat::kPly,
                     PlyEncoding::kBinaryLittleEndian, prov);
    dump_cells(octree, (dir / "cells.txt").string());
    dump_parts(parts, (dir / "parts.txt").string());
    save_labels(labels, (dir / "labels.srlb").string());

    {
        std::ofstream vf(dir / "vertices.txt");
        vf << "# " << prov << "\n";
        for (const auto& lat : vertices.lattice)
            vf << lat[0] << ' ' << lat[1] << ' ' << lat[2] << '\n';
        if (!vf) throw IoFailure("failed writing vertex dump");
    }

    for (std::size_t j = 0; j < parts.size(); ++j) {
        PartPrecompute pre = precompute_part(cloud, vertices, parts[j], cfg);
        TrainBatch batch;
        batch.inputs = std::move(pre.inputs);
        batch.labels.resize(pre.row_to_global.size());
        for (std::size_t r = 0; r < pre.row_to_global.size(); ++r)
            batch.labels[r] = labels.labels[pre.row_to_global[r]];
        std::ostringstream name;
        name << "part_" << std::setw(4) << std::setfill('0') << j << ".srtb";
        save_train_batch(batch, prov, (dir / name.str()).string());
    }

    std::ofstream manifest(dir / "manifest.txt");
    manifest << "# " << prov << "\n"
             << "source_cloud = " << cloud_path << "\n"
             << "source_mesh = " << gt_mesh_path << "\n"
             << "points = " << cloud.size() << "\n"
             << "vertices = " << vertices.size() << "\n"
             << "parts = " << parts.size() << "\n"
             << "transform_scale = " << std::setprecision(17) << transform.scale
             << "\ntransform_offset = " << transform.offset.x << ' '
             << transform.offset.y << ' ' << transform.offset.z << "\n"
             << canonical_config(cfg);
    if (!manifest) throw IoFailure("failed writing manifest");
}

namespace {

std::vector<std::string> batch_files(const std::string& dir) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir))
        throw IoFailure("dataset directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.starts_with("part_") && name.ends_with(".srtb"))
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoFailure("no part files in dataset " + dir);
    return files;
}

}  // namespace

void cmd_train(const std::vector<std::string>& dataset_dirs,
               const std::vector<std::string>& validation_dirs,
               const std::string& checkpoint_path, const std::string& curve_path,
               const PipelineConfig& cfg) {
    if (dataset_dirs.empty()) throw ConfigError("train needs >= 1 dataset");
    std::vector<TrainBatch> batches;
    for (const std::string& dir : dataset_dirs)
        for (const std::string& file : batch_files(dir))
            batches.push_back(load_train_batch(file));
    TrainOptions opts;
    for (const std::string& dir : validation_dirs)
        for (const std::string& file : batch_files(dir)) {
            opts.validation_batches.push_back(batches.size());
            batches.push_back(load_train_batch(file));
        }

    opts.step_size = cfg.step_size;
    opts.steps = cfg.steps;
    opts.seed = cfg.train_seed;
    opts.checkpoint_interval = cfg.checkpoint_interval;
    if (cfg.checkpoint_interval) opts.checkpoint_prefix = checkpoint_path + ".step";

    NetworkState init = initialize_network(cfg.hyperparameters(), cfg.init_seed);
    TrainResult result = train(batches, init, opts);
    result.state.provenance = provenance_string(cfg);
    save_checkpoint(result.state, checkpoint_path);
    if (!curve_path.empty())
        save_loss_curve(result.curve, curve_path, provenance_string(cfg));
}

void cmd_reconstruct(const std::string& cloud_path,
                     const std::optional<std::string>& checkpoint_path,
                     const std::string& out_mesh_path,
                     const PipelineConfig& cfg, const std::string& labels_out) {
    OrientedPointCloud cloud = load_point_cloud(cloud_path);
    NetworkState net;
    const NetworkState* net_ptr = nullptr;
    if (checkpoint_path) {
        net = load_checkpoint(*checkpoint_path);
        net_ptr = &net;
    }
    ReconstructionResult result = reconstruct(cloud, cfg, net_ptr);
    save_mesh(result.mesh, out_mesh_path, mesh_format_from_path(out_mesh_path),
              PlyEncoding::kBinaryLittleEndian, provenance_string(cfg));
    if (!labels_out.empty()) save_labels(result.labels, labels_out);
}

MetricsReport cmd_evaluate(const std::string& pred_mesh_path,
                           const std::optional<std::string>& gt_mesh_path,
                           const std::optional<std::string>& pred_labels_path,
                           const std::optional<std::string>& gt_labels_path,
                           const PipelineConfig& cfg,
                           const std::string& report_out) {
    MetricsReport report;
    report.provenance["config_hash"] = config_hash(cfg);
    report.provenance["seed"] = std::to_string(cfg.seed);
    report.provenance["samples"] = std::to_string(cfg.samples);
    report.provenance["normal_consistency_convention"] =
        "mean absolute dot over symmetric nearest neighbors";

    if (gt_mesh_path) {
        TriangleMesh pred = load_mesh(pred_mesh_path);
        TriangleMesh gt = load_mesh(*gt_mesh_path);
        SampledSurface sp = sample_mesh(pred, cfg.samples, cfg.seed);
        SampledSurface sg = sample_mesh(gt, cfg.samples, cfg.seed);
        report.values["chamfer_l1"] = chamfer_l1(sp, sg);
        ChamferSq sq = chamfer_sq(sp, sg);
        report.values["chamfer_sq_mean"] = sq.mean;
        report.values["chamfer_sq_rms"] = sq.rms;
        report.values["normal_consistency"] = normal_consistency(sp, sg);
    }
    if (pred_labels_path && gt_labels_path) {
        LabelSet pred = load_labels(*pred_labels_path);
        LabelSet gt = load_labels(*gt_labels_path);
        report.values["vertex_accuracy"] = vertex_accuracy(pred, gt);
        bool both_empty = false;
        report.values["label_iou_proxy"] = label_iou(pred, gt, &both_empty);
        report.provenance["label_iou_note"] =
            std::string("proxy over octree vertices, not volumetric IoU") +
            (both_empty ? "; both inside-sets empty" : "");
    }
    if (report.values.empty())
        throw ConfigError("evaluate needs a ground-truth mesh or label pair");

    if (!report_out.empty()) {
        std::ofstream out(report_out);
        if (!out) throw IoFailure("cannot open " + report_out + " for writing");
        out << report.to_json();
        if (!out) throw IoFailure("failed writing " + report_out);
    }
    return report;
}

void cmd_gen_analytic(const std::string& shape, const std::string& out_cloud,
                      const std::string& out_mesh, std::size_t count,
                      std::uint64_t seed, double sigma) {
    const Vec3 center{0.5, 0.5, 0.5};
    OrientedPointCloud cloud;
    TriangleMesh mesh;
    if (shape == "sphere") {
        cloud = sample_sphere_cloud(center, 0.3, count, seed, sigma);
        mesh = icosphere_mesh(center, 0.3, 5);
    } else if (shape == "torus") {
        cloud = sample_torus_cloud(center, 0.25, 0.1, count, seed, sigma);
        mesh = torus_mesh(center, 0.25, 0.1, 192, 96);
    } else if (shape == "plane") {
        cloud = sample_plane_cloud(center, 0.35, count, seed, sigma);
        mesh = plane_mesh(center, 0.35, 64);
    } else {
        throw ConfigError("unknown analytic shape '" + shape +
                          "' (expected sphere, torus, or plane)");
    }
    std::string prov = "shape=" + shape + " seed=" + std::to_string(seed) +
                       " sigma=" + std::to_string(sigma);
    save_point_cloud(cloud, out_cloud, cloud_format_from_path(out_cloud),
                     PlyEncoding::kBinaryLittleEndian, prov);
    if (!out_mesh.empty())
        save_mesh(mesh, out_mesh, mesh_format_from_path(out_mesh),
                  PlyEncoding::kBinaryLittleEndian, prov);
}

}  // namespace surfrec
