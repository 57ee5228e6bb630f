#ifndef SURFREC_PIPELINE_HPP
#define SURFREC_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surfrec/metrics.hpp"
#include "surfrec/network.hpp"
#include "surfrec/octree.hpp"
#include "surfrec/partition.hpp"
#include "surfrec/point_cloud.hpp"

namespace surfrec {

/// Everything the pipeline commands need, loadable from an INI-style file
/// ([section] + key = value) and validated against a fixed schema.
struct PipelineConfig {
    // [octree]
    int depth = 6;
    double normalize_padding = 0.05;
    // [partition]
    std::size_t max_batch = 300000;
    double pad = 0.0;  // <= 0 selects the derived receptive-field default
    std::uint32_t force_parts = 1;
    // [tangent]
    std::uint32_t extent = 3;
    double base_radius_cells = 4.0;      // finest radius = this / 2^depth
    double baseline_radius_cells = 1.0;  // non-learned classifier radius, in cells
    // [network]
    std::uint32_t w1 = 16, w2 = 32, w3 = 64;
    double activation_slope = 0.1;
    std::uint64_t init_seed = 1;
    // [train]
    std::size_t steps = 2000;
    double step_size = 1e-3;
    std::uint64_t train_seed = 1;
    std::size_t checkpoint_interval = 0;
    // [smoothing]
    double lambda = 0.5;
    double mu = -0.53;
    int iterations = 10;
    // [pipeline]
    int workers = 0;  // 0: SURFREC_WORKERS env var, then hardware concurrency
    std::uint64_t seed = 0;
    // [evaluate]
    std::size_t samples = 100000;

    /// Per-scale gather radius, s in {1,2,3}: 2^{s-1} * base / 2^depth.
    double scale_radius(int s) const;
    Hyperparameters hyperparameters() const;
    PartitionConfig partition_config() const;
};

/// Throws ConfigError on unknown keys, bad values, or malformed syntax.
PipelineConfig load_config(const std::string& path);

/// Canonical serialization (stable key order) and its 64-bit hash in hex;
/// embedded in every output for provenance.
std::string canonical_config(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

/// Resolved worker count (>= 1).
int resolve_workers(const PipelineConfig& cfg);

/// Network inputs for one part plus the bookkeeping to read results back:
/// rows are the part's owned + halo vertices merged in ascending global
/// order, so complete coarse cells see sources in the same order as a
/// single-part run.
struct PartPrecompute {
    PartInputs inputs;
    std::vector<std::uint32_t> row_to_global;  // ascending
    std::vector<std::uint32_t> owned_rows;     // rows owned by this part
};

PartPrecompute precompute_part(const OrientedPointCloud& cloud,
                               const VertexSet& vertices, const Part& part,
                               const PipelineConfig& cfg);

/// Classifies all vertices part by part (concurrently up to `workers`) and
/// merges by part id; `net` = nullptr selects the geometric baseline.
LabelSet classify_parts(const OrientedPointCloud& cloud,
                        const VertexSet& vertices,
                        const std::vector<Part>& parts,
                        const PipelineConfig& cfg, const NetworkState* net);

struct ReconstructionResult {
    TriangleMesh mesh;           // world coordinates, smoothed
    TriangleMesh raw_mesh;       // world coordinates, before smoothing
    LabelSet labels;             // per octree vertex (normalized space)
    NormalizationTransform transform;
    std::size_t vertex_count = 0;
    std::size_t part_count = 0;
};

/// normalize -> octree -> partition -> classify -> merge -> marching cubes
/// -> smooth -> denormalize. Output independent of the worker count.
ReconstructionResult reconstruct(const OrientedPointCloud& world_cloud,
                                 const PipelineConfig& cfg,
                                 const NetworkState* net);

/// Per-part training bundle persisted by `prepare` ("SRTB" binary format).
void save_train_batch(const TrainBatch& batch, const std::string& provenance,
                      const std::string& path);
TrainBatch load_train_batch(const std::string& path);

/// Commands (exceptions propagate; the CLI maps them to exit codes).
void cmd_prepare(const std::string& cloud_path, const std::string& gt_mesh_path,
                 const std::string& out_dir, const PipelineConfig& cfg);
void cmd_train(const std::vector<std::string>& dataset_dirs,
               const std::vector<std::string>& validation_dirs,
               const std::string& checkpoint_path, const std::string& curve_path,
               const PipelineConfig& cfg);
void cmd_reconstruct(const std::string& cloud_path,
                     const std::optional<std::string>& checkpoint_path,
                     const std::string& out_mesh_path,
                     const PipelineConfig& cfg,
                     const std::string& labels_out = "");
MetricsReport cmd_evaluate(const std::string& pred_mesh_path,
                           const std::optional<std::string>& gt_mesh_path,
                           const std::optional<std::string>& pred_labels_path,
                           const std::optional<std::string>& gt_labels_path,
                           const PipelineConfig& cfg,
                           const std::string& report_out = "");
void cmd_gen_analytic(const std::string& shape, const std::string& out_cloud,
                      const std::string& out_mesh, std::size_t count,
                      std::uint64_t seed, double sigma);

}  // namespace surfrec

#endif
