#ifndef SURFREC_NETWORK_HPP
#define SURFREC_NETWORK_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "surfrec/tangent.hpp"

namespace surfrec {

/// Dense row-major matrix; feature maps are (locations x channels).
struct Tensor {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }
    bool finite() const;
};

/// Channel widths of the three scales plus fixed conventions (image extent,
/// activation slope). Widths are configurable; defaults target desk scale.
struct Hyperparameters {
    int depth = 6;            // octree depth the caches were built for
    std::uint32_t extent = 3; // tangent image edge l
    std::uint32_t signal_channels = 4;
    std::uint32_t w1 = 16, w2 = 32, w3 = 64;
    double activation_slope = 0.1;

    bool operator==(const Hyperparameters&) const = default;
};

/// All trainable tensors keyed by layer name, plus the hyperparameters they
/// were shaped for.
struct NetworkState {
    Hyperparameters hyper;
    std::map<std::string, Tensor> params;
    std::string provenance;  // free-form, persisted in checkpoints

    std::size_t parameter_count() const;
};

/// Fan-in-scaled uniform initialization, deterministic per seed.
NetworkState initialize_network(const Hyperparameters& hyper, std::uint64_t seed);

/// Everything the network needs for one part, precomputed by the pipeline.
/// Point side: signals at the finest point representatives (scale 1), mean
/// pooling maps up to scales 2 and 3. Vertex side: per-scale gather tables
/// whose sources are the point representatives of the matching scale, and
/// pooling maps over the vertex pyramid.
struct PartInputs {
    SignalImage signals;              // at scale-1 point representatives
    SignalImage vertex_signals;       // raw-cloud signals at the vertices; this
                                      // is the only input that encodes a
                                      // vertex's offset along its frame normal
    std::vector<std::uint32_t> pool12, pool23;  // point rep -> coarser cell
    std::size_t n2 = 0, n3 = 0;       // coarse point location counts
    GatherTable v1, v2, v3;           // vertex gathers, sources = point reps
    std::vector<std::uint32_t> vpool12, vpool23;
    std::size_t nv2 = 0, nv3 = 0;     // coarse vertex location counts
    std::size_t num_vertices = 0;
};

struct TrainBatch {
    PartInputs inputs;
    std::vector<std::uint8_t> labels;  // one per vertex, {0,1}
};

/// Low-level building blocks (exposed for differential testing).
Tensor tangent_conv_forward(const Tensor& input, const GatherTable& table,
                            const Tensor& weights, const Tensor& bias);
Tensor conv1x1_forward(const Tensor& input, const Tensor& weights,
                       const Tensor& bias);
Tensor pool_forward(const Tensor& input, const std::vector<std::uint32_t>& index,
                    std::size_t coarse_count);
Tensor unpool_forward(const Tensor& input,
                      const std::vector<std::uint32_t>& index);
Tensor leaky_relu(const Tensor& input, double slope);

/// Per-vertex front probability in (0,1); length = inputs.num_vertices.
/// Throws HyperparameterMismatch when the caches disagree with the state.
std::vector<double> forward(const PartInputs& inputs, const NetworkState& state);

struct BackwardResult {
    double loss = 0.0;
    std::map<std::string, Tensor> gradients;  // same keys/shapes as params
    std::vector<double> probabilities;
};

/// Mean binary cross-entropy and exact reverse-mode gradients.
/// Throws NonFiniteLoss if the loss is not finite.
BackwardResult backward(const TrainBatch& batch, const NetworkState& state);

struct TrainOptions {
    double step_size = 1e-3;
    std::size_t steps = 10000;
    std::uint64_t seed = 0;
    std::size_t checkpoint_interval = 0;  // 0 = no periodic checkpoints
    std::string checkpoint_prefix;
    // batches evaluated (not trained on) to pick the retained state
    std::vector<std::size_t> validation_batches;
};

struct TrainRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double val_accuracy = 0.0;  // NaN when no validation set
};

struct TrainResult {
    NetworkState state;  // best validation accuracy, or final when none
    std::vector<TrainRecord> curve;
};

/// Adaptive-moment optimization over the training batches, visited in a
/// seed-deterministic shuffled order. Bitwise reproducible per seed.
TrainResult train(const std::vector<TrainBatch>& dataset,
                  const NetworkState& initial, const TrainOptions& opts);

void save_loss_curve(const std::vector<TrainRecord>& curve,
                     const std::string& path,
                     const std::string& provenance = "");

/// Versioned little-endian binary checkpoint with a trailing checksum.
/// Roundtrip is bit-exact. Throws VersionMismatch / CorruptCheckpoint.
void save_checkpoint(const NetworkState& state, const std::string& path);
NetworkState load_checkpoint(const std::string& path);

}  // namespace surfrec

#endif
