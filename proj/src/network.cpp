#include "surfrec/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "surfrec/errors.hpp"

namespace surfrec {

bool Tensor::finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

// Layer tensors in a fixed order; this order also fixes initialization draws.
std::vector<std::pair<std::string, std::array<std::size_t, 2>>> layer_shapes(
    const Hyperparameters& h) {
    const std::size_t ll = static_cast<std::size_t>(h.extent) * h.extent;
    const std::size_t sc = h.signal_channels, w1 = h.w1, w2 = h.w2, w3 = h.w3;
    return {
        {"s1.w", {ll * sc, w1}},     {"s1.b", {1, w1}},
        {"b1.w", {w1, w1}},          {"b1.b", {1, w1}},
        {"a2.w", {w1, w2}},          {"a2.b", {1, w2}},
        {"a3.w", {w2, w3}},          {"a3.b", {1, w3}},
        {"c2.w", {w3 + w2, w2}},     {"c2.b", {1, w2}},
        {"c1.w", {w2 + w1, w1}},     {"c1.b", {1, w1}},
        {"sv.w", {ll * sc, w1}},     {"sv.b", {1, w1}},
        {"v1.w", {ll * w1, w1}},     {"v1.b", {1, w1}},
        {"v2.w", {ll * w2, w2}},     {"v2.b", {1, w2}},
        {"v3.w", {ll * w3, w3}},     {"v3.b", {1, w3}},
        {"h3.w", {w3, w3}},          {"h3.b", {1, w3}},
        {"h2.w", {w3 + w2, w2}},     {"h2.b", {1, w2}},
        {"h1.w", {w2 + w1, w2}},     {"h1.b", {1, w2}},
        {"out.w", {w2, 1}},          {"out.b", {1, 1}},
    };
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows) throw ShapeMismatch("concat row mismatch");
    Tensor out(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        std::copy_n(&a.data[r * a.cols], a.cols, &out.data[r * out.cols]);
        std::copy_n(&b.data[r * b.cols], b.cols, &out.data[r * out.cols + a.cols]);
    }
    return out;
}

void split_cols(const Tensor& cat, Tensor& da, Tensor& db) {
    for (std::size_t r = 0; r < cat.rows; ++r) {
        std::copy_n(&cat.data[r * cat.cols], da.cols, &da.data[r * da.cols]);
        std::copy_n(&cat.data[r * cat.cols + da.cols], db.cols,
                    &db.data[r * db.cols]);
    }
}

// gathered l*l*C image per query location, driven by the table
Tensor gather_image(const Tensor& input, const GatherTable& table) {
    const std::size_t pixels = table.pixels();
    Tensor out(table.num_locations, pixels * input.cols);
    for (std::size_t q = 0; q < table.num_locations; ++q) {
        for (std::size_t p = 0; p < pixels; ++p) {
            std::uint64_t begin = table.pixel_offsets[q * pixels + p];
            std::uint64_t end = table.pixel_offsets[q * pixels + p + 1];
            double* dst = &out.data[q * out.cols + p * input.cols];
            for (std::uint64_t e = begin; e < end; ++e) {
                const auto& entry = table.entries[e];
                if (entry.source >= input.rows)
                    throw IndexOutOfRange("gather source " +
                                          std::to_string(entry.source) +
                                          " beyond " + std::to_string(input.rows));
                const double* src = &input.data[entry.source * input.cols];
                for (std::size_t c = 0; c < input.cols; ++c)
                    dst[c] += entry.weight * src[c];
            }
        }
    }
    return out;
}

void scatter_image_grad(const Tensor& dgathered, const GatherTable& table,
                        Tensor& dinput) {
    const std::size_t pixels = table.pixels();
    const std::size_t channels = dinput.cols;
    for (std::size_t q = 0; q < table.num_locations; ++q) {
        for (std::size_t p = 0; p < pixels; ++p) {
            std::uint64_t begin = table.pixel_offsets[q * pixels + p];
            std::uint64_t end = table.pixel_offsets[q * pixels + p + 1];
            const double* src = &dgathered.data[q * dgathered.cols + p * channels];
            for (std::uint64_t e = begin; e < end; ++e) {
                const auto& entry = table.entries[e];
                double* dst = &dinput.data[entry.source * channels];
                for (std::size_t c = 0; c < channels; ++c)
                    dst[c] += entry.weight * src[c];
            }
        }
    }
}

Tensor matmul_add_bias(const Tensor& input, const Tensor& w, const Tensor& b) {
    if (input.cols != w.rows || b.cols != w.cols || b.rows != 1)
        throw ShapeMismatch("affine shapes: input " + std::to_string(input.rows) +
                            "x" + std::to_string(input.cols) + ", weights " +
                            std::to_string(w.rows) + "x" + std::to_string(w.cols));
    Tensor out(input.rows, w.cols);
    for (std::size_t r = 0; r < input.rows; ++r) {
        double* dst = &out.data[r * out.cols];
        std::copy_n(b.data.data(), b.cols, dst);
        const double* src = &input.data[r * input.cols];
        for (std::size_t k = 0; k < input.cols; ++k) {
            double x = src[k];
            if (x == 0.0) continue;
            const double* wrow = &w.data[k * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) dst[c] += x * wrow[c];
        }
    }
    return out;
}

// accumulates dW/db and returns d(input)
Tensor matmul_backward(const Tensor& input, const Tensor& w, const Tensor& dout,
                       Tensor& dw, Tensor& db) {
    Tensor dinput(input.rows, input.cols);
    for (std::size_t r = 0; r < input.rows; ++r) {
        const double* go = &dout.data[r * dout.cols];
        const double* src = &input.data[r * input.cols];
        for (std::size_t c = 0; c < dout.cols; ++c) db.data[c] += go[c];
        for (std::size_t k = 0; k < input.cols; ++k) {
            const double* wrow = &w.data[k * w.cols];
            double* dwrow = &dw.data[k * w.cols];
            double acc = 0.0;
            for (std::size_t c = 0; c < dout.cols; ++c) {
                acc += wrow[c] * go[c];
                dwrow[c] += src[k] * go[c];
            }
            dinput.data[r * input.cols + k] = acc;
        }
    }
    return dinput;
}

Tensor lrelu_backward(const Tensor& pre, const Tensor& dout, double slope) {
    Tensor din(pre.rows, pre.cols);
    for (std::size_t i = 0; i < pre.data.size(); ++i)
        din.data[i] = dout.data[i] * (pre.data[i] > 0.0 ? 1.0 : slope);
    return din;
}

Tensor signals_as_tensor(const SignalImage& s) {
    Tensor t(s.num_locations,
             static_cast<std::size_t>(s.extent) * s.extent * s.channels);
    t.data = s.data;
    if (t.data.size() != t.rows * t.cols)
        throw ShapeMismatch("signal image data size mismatch");
    return t;
}

const Tensor& param(const NetworkState& state, const std::string& name) {
    auto it = state.params.find(name);
    if (it == state.params.end())
        throw HyperparameterMismatch("missing parameter tensor " + name);
    return it->second;
}

void check_compatible(const PartInputs& in, const NetworkState& state) {
    const Hyperparameters& h = state.hyper;
    if (in.signals.extent != h.extent || in.v1.extent != h.extent ||
        in.v2.extent != h.extent || in.v3.extent != h.extent)
        throw HyperparameterMismatch("tangent image extent mismatch");
    if (in.signals.channels != h.signal_channels)
        throw HyperparameterMismatch("signal channel count mismatch");
    if (in.vertex_signals.extent != h.extent ||
        in.vertex_signals.channels != h.signal_channels)
        throw HyperparameterMismatch("vertex signal image shape mismatch");
    if (in.vertex_signals.num_locations != in.num_vertices)
        throw ShapeMismatch("vertex signal locations != vertex count");
    if (in.pool12.size() != in.signals.num_locations)
        throw ShapeMismatch("pool12 length != scale-1 location count");
    if (in.pool23.size() != in.n2) throw ShapeMismatch("pool23 length != n2");
    if (in.v1.num_locations != in.num_vertices)
        throw ShapeMismatch("v1 gather locations != vertex count");
    if (in.vpool12.size() != in.num_vertices)
        throw ShapeMismatch("vpool12 length != vertex count");
    if (in.vpool23.size() != in.nv2) throw ShapeMismatch("vpool23 length != nv2");
    if (in.v2.num_locations != in.nv2 || in.v3.num_locations != in.nv3)
        throw ShapeMismatch("vertex gather location counts disagree with pyramid");
    for (const auto& [name, shape] : layer_shapes(h)) {
        const Tensor& t = param(state, name);
        if (t.rows != shape[0] || t.cols != shape[1])
            throw HyperparameterMismatch(
                "tensor " + name + " is " + std::to_string(t.rows) + "x" +
                std::to_string(t.cols) + ", expected " + std::to_string(shape[0]) +
                "x" + std::to_string(shape[1]));
    }
}

// every intermediate needed by the backward pass
struct Trace {
    Tensor s1_flat, z_s1, a_s1, z_b1, B1;
    Tensor p2, z_a2, A2, p3, z_a3, A3;
    Tensor u2, cat2, z_c2, C2, u1, cat1, z_c1, C1;
    Tensor g1, sv_flat, z_v1, VF1, g2, z_v2, VF2, g3, z_v3, VF3;
    Tensor z_h3, H3, vu2, catv2, z_h2, H2, vu1, catv1, z_h1, H1;
    Tensor logit;
    std::vector<double> prob;
};

Trace run_forward(const PartInputs& in, const NetworkState& state) {
    check_compatible(in, state);
    const double slope = state.hyper.activation_slope;
    auto act = [&](const Tensor& z) { return leaky_relu(z, slope); };
    Trace t;

    t.s1_flat = signals_as_tensor(in.signals);
    t.z_s1 = matmul_add_bias(t.s1_flat, param(state, "s1.w"), param(state, "s1.b"));
    t.a_s1 = act(t.z_s1);
    t.z_b1 = matmul_add_bias(t.a_s1, param(state, "b1.w"), param(state, "b1.b"));
    t.B1 = act(t.z_b1);

    t.p2 = pool_forward(t.B1, in.pool12, in.n2);
    t.z_a2 = matmul_add_bias(t.p2, param(state, "a2.w"), param(state, "a2.b"));
    t.A2 = act(t.z_a2);
    t.p3 = pool_forward(t.A2, in.pool23, in.n3);
    t.z_a3 = matmul_add_bias(t.p3, param(state, "a3.w"), param(state, "a3.b"));
    t.A3 = act(t.z_a3);

    t.u2 = unpool_forward(t.A3, in.pool23);
    t.cat2 = concat_cols(t.u2, t.A2);
    t.z_c2 = matmul_add_bias(t.cat2, param(state, "c2.w"), param(state, "c2.b"));
    t.C2 = act(t.z_c2);
    t.u1 = unpool_forward(t.C2, in.pool12);
    t.cat1 = concat_cols(t.u1, t.B1);
    t.z_c1 = matmul_add_bias(t.cat1, param(state, "c1.w"), param(state, "c1.b"));
    t.C1 = act(t.z_c1);

    t.g1 = gather_image(t.C1, in.v1);
    t.z_v1 = matmul_add_bias(t.g1, param(state, "v1.w"), param(state, "v1.b"));
    // Gathered point features are blind to a vertex's signed offset along its
    // own frame normal, so the finest vertex layer also receives the vertex's
    // raw-cloud signal image, added pre-activation.
    t.sv_flat = signals_as_tensor(in.vertex_signals);
    Tensor z_sv =
        matmul_add_bias(t.sv_flat, param(state, "sv.w"), param(state, "sv.b"));
    for (std::size_t i = 0; i < t.z_v1.data.size(); ++i)
        t.z_v1.data[i] += z_sv.data[i];
    t.VF1 = act(t.z_v1);
    t.g2 = gather_image(t.C2, in.v2);
    t.z_v2 = matmul_add_bias(t.g2, param(state, "v2.w"), param(state, "v2.b"));
    t.VF2 = act(t.z_v2);
    t.g3 = gather_image(t.A3, in.v3);
    t.z_v3 = matmul_add_bias(t.g3, param(state, "v3.w"), param(state, "v3.b"));
    t.VF3 = act(t.z_v3);

    t.z_h3 = matmul_add_bias(t.VF3, param(state, "h3.w"), param(state, "h3.b"));
    t.H3 = act(t.z_h3);
    t.vu2 = unpool_forward(t.H3, in.vpool23);
    t.catv2 = concat_cols(t.vu2, t.VF2);
    t.z_h2 = matmul_add_bias(t.catv2, param(state, "h2.w"), param(state, "h2.b"));
    t.H2 = act(t.z_h2);
    t.vu1 = unpool_forward(t.H2, in.vpool12);
    t.catv1 = concat_cols(t.vu1, t.VF1);
    t.z_h1 = matmul_add_bias(t.catv1, param(state, "h1.w"), param(state, "h1.b"));
    t.H1 = act(t.z_h1);

    t.logit = matmul_add_bias(t.H1, param(state, "out.w"), param(state, "out.b"));
    t.prob.resize(t.logit.rows);
    for (std::size_t i = 0; i < t.logit.rows; ++i)
        t.prob[i] = 1.0 / (1.0 + std::exp(-t.logit.data[i]));
    return t;
}

std::vector<std::uint32_t> pool_counts(const std::vector<std::uint32_t>& index,
                                       std::size_t coarse_count) {
    std::vector<std::uint32_t> counts(coarse_count, 0);
    for (std::uint32_t c : index) {
        if (c >= coarse_count)
            throw IndexOutOfRange("pool index " + std::to_string(c) + " beyond " +
                                  std::to_string(coarse_count));
        ++counts[c];
    }
    return counts;
}

}  // namespace

Tensor leaky_relu(const Tensor& input, double slope) {
    Tensor out(input.rows, input.cols);
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        double v = input.data[i];
        out.data[i] = v > 0.0 ? v : slope * v;
    }
    return out;
}

Tensor conv1x1_forward(const Tensor& input, const Tensor& weights,
                       const Tensor& bias) {
    return matmul_add_bias(input, weights, bias);
}

Tensor tangent_conv_forward(const Tensor& input, const GatherTable& table,
                            const Tensor& weights, const Tensor& bias) {
    return matmul_add_bias(gather_image(input, table), weights, bias);
}

Tensor pool_forward(const Tensor& input, const std::vector<std::uint32_t>& index,
                    std::size_t coarse_count) {
    if (index.size() != input.rows)
        throw ShapeMismatch("pool index length != fine location count");
    auto counts = pool_counts(index, coarse_count);
    Tensor out(coarse_count, input.cols);
    for (std::size_t r = 0; r < input.rows; ++r) {
        double* dst = &out.data[static_cast<std::size_t>(index[r]) * input.cols];
        const double* src = &input.data[r * input.cols];
        for (std::size_t c = 0; c < input.cols; ++c) dst[c] += src[c];
    }
    for (std::size_t g = 0; g < coarse_count; ++g) {
        if (counts[g] == 0) continue;  // empty cell keeps zeros
        double inv = 1.0 / static_cast<double>(counts[g]);
        for (std::size_t c = 0; c < input.cols; ++c)
            out.data[g * input.cols + c] *= inv;
    }
    return out;
}

Tensor unpool_forward(const Tensor& input,
                      const std::vector<std::uint32_t>& index) {
    Tensor out(index.size(), input.cols);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= input.rows)
            throw IndexOutOfRange("unpool index " + std::to_string(index[r]) +
                                  " beyond " + std::to_string(input.rows));
        std::copy_n(&input.data[static_cast<std::size_t>(index[r]) * input.cols],
                    input.cols, &out.data[r * input.cols]);
    }
    return out;
}

std::size_t NetworkState::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

NetworkState initialize_network(const Hyperparameters& hyper,
                                std::uint64_t seed) {
    NetworkState state;
    state.hyper = hyper;
    std::mt19937_64 rng(seed);
    for (const auto& [name, shape] : layer_shapes(hyper)) {
        Tensor t(shape[0], shape[1]);
        if (name.ends_with(".w")) {
            double bound = std::sqrt(1.0 / static_cast<double>(shape[0]));
            std::uniform_real_distribution<double> uni(-bound, bound);
            for (double& v : t.data) v = uni(rng);
        }
        state.params.emplace(name, std::move(t));
    }
    return state;
}

std::vector<double> forward(const PartInputs& inputs, const NetworkState& state) {
    return run_forward(inputs, state).prob;
}

BackwardResult backward(const TrainBatch& batch, const NetworkState& state) {
    const PartInputs& in = batch.inputs;
    if (batch.labels.size() != in.num_vertices)
        throw LengthMismatch("label count != vertex count");
    Trace t = run_forward(in, state);
    const double slope = state.hyper.activation_slope;

    BackwardResult result;
    result.probabilities = t.prob;
    for (const auto& [name, p] : state.params)
        result.gradients.emplace(name, Tensor(p.rows, p.cols));
    auto& g = result.gradients;

    // stable mean BCE on logits
    const auto m = static_cast<double>(in.num_vertices);
    double loss = 0.0;
    Tensor dlogit(t.logit.rows, 1);
    for (std::size_t i = 0; i < t.logit.rows; ++i) {
        double z = t.logit.data[i];
        double y = batch.labels[i] ? 1.0 : 0.0;
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        dlogit.data[i] = (t.prob[i] - y) / m;
    }
    loss /= m;
    if (!std::isfinite(loss)) throw NonFiniteLoss("loss is not finite");
    result.loss = loss;

    // head
    Tensor dH1 = matmul_backward(t.H1, param(state, "out.w"), dlogit,
                                 g.at("out.w"), g.at("out.b"));
    Tensor dz_h1 = lrelu_backward(t.z_h1, dH1, slope);
    Tensor dcatv1 = matmul_backward(t.catv1, param(state, "h1.w"), dz_h1,
                                    g.at("h1.w"), g.at("h1.b"));
    Tensor dvu1(t.vu1.rows, t.vu1.cols), dVF1(t.VF1.rows, t.VF1.cols);
    split_cols(dcatv1, dvu1, dVF1);
    Tensor dH2(t.H2.rows, t.H2.cols);
    for (std::size_t r = 0; r < in.vpool12.size(); ++r)
        for (std::size_t c = 0; c < dH2.cols; ++c)
            dH2.data[in.vpool12[r] * dH2.cols + c] += dvu1.data[r * dvu1.cols + c];
    Tensor dz_h2 = lrelu_backward(t.z_h2, dH2, slope);
    Tensor dcatv2 = matmul_backward(t.catv2, param(state, "h2.w"), dz_h2,
                                    g.at("h2.w"), g.at("h2.b"));
    Tensor dvu2(t.vu2.rows, t.vu2.cols), dVF2(t.VF2.rows, t.VF2.cols);
    split_cols(dcatv2, dvu2, dVF2);
    Tensor dH3(t.H3.rows, t.H3.cols);
    for (std::size_t r = 0; r < in.vpool23.size(); ++r)
        for (std::size_t c = 0; c < dH3.cols; ++c)
            dH3.data[in.vpool23[r] * dH3.cols + c] += dvu2.data[r * dvu2.cols + c];
    Tensor dz_h3 = lrelu_backward(t.z_h3, dH3, slope);
    Tensor dVF3 = matmul_backward(t.VF3, param(state, "h3.w"), dz_h3,
                                  g.at("h3.w"), g.at("h3.b"));

    // vertex tangent convolutions back into point features
    Tensor dz_v1 = lrelu_backward(t.z_v1, dVF1, slope);
    matmul_backward(t.sv_flat, param(state, "sv.w"), dz_v1, g.at("sv.w"),
                    g.at("sv.b"));
    Tensor dg1 = matmul_backward(t.g1, param(state, "v1.w"), dz_v1, g.at("v1.w"),
                                 g.at("v1.b"));
    Tensor dC1(t.C1.rows, t.C1.cols);
    scatter_image_grad(dg1, in.v1, dC1);

    Tensor dz_v2 = lrelu_backward(t.z_v2, dVF2, slope);
    Tensor dg2 = matmul_backward(t.g2, param(state, "v2.w"), dz_v2, g.at("v2.w"),
                                 g.at("v2.b"));
    Tensor dC2(t.C2.rows, t.C2.cols);
    scatter_image_grad(dg2, in.v2, dC2);

    Tensor dz_v3 = lrelu_backward(t.z_v3, dVF3, slope);
    Tensor dg3 = matmul_backward(t.g3, param(state, "v3.w"), dz_v3, g.at("v3.w"),
                                 g.at("v3.b"));
    Tensor dA3(t.A3.rows, t.A3.cols);
    scatter_image_grad(dg3, in.v3, dA3);

    // decoder
    Tensor dz_c1 = lrelu_backward(t.z_c1, dC1, slope);
    Tensor dcat1 = matmul_backward(t.cat1, param(state, "c1.w"), dz_c1,
                                   g.at("c1.w"), g.at("c1.b"));
    Tensor du1(t.u1.rows, t.u1.cols), dB1(t.B1.rows, t.B1.cols);
    split_cols(dcat1, du1, dB1);
    for (std::size_t r = 0; r < in.pool12.size(); ++r)
        for (std::size_t c = 0; c < dC2.cols; ++c)
            dC2.data[in.pool12[r] * dC2.cols + c] += du1.data[r * du1.cols + c];

    Tensor dz_c2 = lrelu_backward(t.z_c2, dC2, slope);
    Tensor dcat2 = matmul_backward(t.cat2, param(state, "c2.w"), dz_c2,
                                   g.at("c2.w"), g.at("c2.b"));
    Tensor du2(t.u2.rows, t.u2.cols), dA2(t.A2.rows, t.A2.cols);
    split_cols(dcat2, du2, dA2);
    for (std::size_t r = 0; r < in.pool23.size(); ++r)
        for (std::size_t c = 0; c < dA3.cols; ++c)
            dA3.data[in.pool23[r] * dA3.cols + c] += du2.data[r * du2.cols + c];

    // encoder
    Tensor dz_a3 = lrelu_backward(t.z_a3, dA3, slope);
    Tensor dp3 = matmul_backward(t.p3, param(state, "a3.w"), dz_a3, g.at("a3.w"),
                                 g.at("a3.b"));
    auto counts23 = pool_counts(in.pool23, in.n3);
    for (std::size_t r = 0; r < in.pool23.size(); ++r) {
        double inv = 1.0 / static_cast<double>(counts23[in.pool23[r]]);
        for (std::size_t c = 0; c < dA2.cols; ++c)
            dA2.data[r * dA2.cols + c] +=
                inv * dp3.data[in.pool23[r] * dp3.cols + c];
    }
    Tensor dz_a2 = lrelu_backward(t.z_a2, dA2, slope);
    Tensor dp2 = matmul_backward(t.p2, param(state, "a2.w"), dz_a2, g.at("a2.w"),
                                 g.at("a2.b"));
    auto counts12 = pool_counts(in.pool12, in.n2);
    for (std::size_t r = 0; r < in.pool12.size(); ++r) {
        double inv = 1.0 / static_cast<double>(counts12[in.pool12[r]]);
        for (std::size_t c = 0; c < dB1.cols; ++c)
            dB1.data[r * dB1.cols + c] +=
                inv * dp2.data[in.pool12[r] * dp2.cols + c];
    }
    Tensor dz_b1 = lrelu_backward(t.z_b1, dB1, slope);
    Tensor da_s1 = matmul_backward(t.a_s1, param(state, "b1.w"), dz_b1,
                                   g.at("b1.w"), g.at("b1.b"));
    Tensor dz_s1 = lrelu_backward(t.z_s1, da_s1, slope);
    matmul_backward(t.s1_flat, param(state, "s1.w"), dz_s1, g.at("s1.w"),
                    g.at("s1.b"));
    return result;
}

TrainResult train(const std::vector<TrainBatch>& dataset,
                  const NetworkState& initial, const TrainOptions& opts) {
    if (dataset.empty()) throw EmptyInput("training needs at least one batch");
    std::vector<std::size_t> train_ids;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        bool held_out = std::find(opts.validation_batches.begin(),
                                  opts.validation_batches.end(),
                                  i) != opts.validation_batches.end();
        if (!held_out) train_ids.push_back(i);
    }
    if (train_ids.empty()) throw EmptyInput("every batch is held out");

    TrainResult result;
    result.state = initial;
    NetworkState& state = result.state;

    // adaptive moment estimation
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::map<std::string, Tensor> m1, m2;
    for (const auto& [name, p] : state.params) {
        m1.emplace(name, Tensor(p.rows, p.cols));
        m2.emplace(name, Tensor(p.rows, p.cols));
    }

    auto validate = [&]() -> double {
        if (opts.validation_batches.empty())
            return std::numeric_limits<double>::quiet_NaN();
        std::size_t hits = 0, total = 0;
        for (std::size_t id : opts.validation_batches) {
            const TrainBatch& b = dataset.at(id);
            auto prob = forward(b.inputs, state);
            for (std::size_t i = 0; i < prob.size(); ++i)
                hits += (prob[i] >= 0.5 ? 1 : 0) == (b.labels[i] ? 1 : 0);
            total += prob.size();
        }
        return total ? static_cast<double>(hits) / static_cast<double>(total) : 1.0;
    };

    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    NetworkState best = state;
    double best_val = -1.0;
    double last_val = validate();
    const std::size_t eval_every =
        std::max<std::size_t>(1, std::min<std::size_t>(50, opts.steps ? opts.steps : 1));

    for (std::size_t step = 1; step <= opts.steps; ++step) {
        if (cursor == 0) {
            order = train_ids;
            std::shuffle(order.begin(), order.end(), rng);
        }
        const TrainBatch& batch = dataset[order[cursor]];
        cursor = (cursor + 1) % order.size();

        BackwardResult back = backward(batch, state);
        double correction1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        double correction2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (auto& [name, p] : state.params) {
            const Tensor& grad = back.gradients.at(name);
            Tensor& a = m1.at(name);
            Tensor& b = m2.at(name);
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                a.data[i] = beta1 * a.data[i] + (1.0 - beta1) * grad.data[i];
                b.data[i] =
                    beta2 * b.data[i] + (1.0 - beta2) * grad.data[i] * grad.data[i];
                double mhat = a.data[i] / correction1;
                double vhat = b.data[i] / correction2;
                p.data[i] -= opts.step_size * mhat / (std::sqrt(vhat) + eps);
            }
        }

        if (step % eval_every == 0 || step == opts.steps) {
            last_val = validate();
            if (!opts.validation_batches.empty() && last_val > best_val) {
                best_val = last_val;
                best = state;
            }
        }
        result.curve.push_back({step, back.loss, last_val});

        if (opts.checkpoint_interval && step % opts.checkpoint_interval == 0 &&
            !opts.checkpoint_prefix.empty())
            save_checkpoint(state,
                            opts.checkpoint_prefix + std::to_string(step) + ".ckpt");
    }
    if (!opts.validation_batches.empty() && best_val >= 0.0)
        result.state = std::move(best);
    return result;
}

void save_loss_curve(const std::vector<TrainRecord>& curve,
                     const std::string& path, const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.precision(17);
    if (!provenance.empty()) out << "# " << provenance << '\n';
    out << "step,loss,val_accuracy\n";
    for (const auto& rec : curve)
        out << rec.step << ',' << rec.loss << ',' << rec.val_accuracy << '\n';
    if (!out) throw IoFailure("failed writing " + path);
}

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'R', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

template <typename T>
void put(std::string& out, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size())
        throw CorruptCheckpoint("truncated checkpoint");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_checkpoint(const NetworkState& state, const std::string& path) {
    std::string body;
    body.append(kCheckpointMagic, 4);
    put(body, kCheckpointVersion);
    put(body, static_cast<std::int32_t>(state.hyper.depth));
    put(body, state.hyper.extent);
    put(body, state.hyper.signal_channels);
    put(body, state.hyper.w1);
    put(body, state.hyper.w2);
    put(body, state.hyper.w3);
    put(body, state.hyper.activation_slope);
    put(body, static_cast<std::uint32_t>(state.provenance.size()));
    body.append(state.provenance);
    put(body, static_cast<std::uint32_t>(state.params.size()));
    for (const auto& [name, t] : state.params) {
        put(body, static_cast<std::uint16_t>(name.size()));
        body.append(name);
        put(body, static_cast<std::uint64_t>(t.rows));
        put(body, static_cast<std::uint64_t>(t.cols));
        body.append(reinterpret_cast<const char*>(t.data.data()),
                    t.data.size() * sizeof(double));
    }
    std::uint64_t checksum = fnv1a(body);
    put(body, checksum);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoFailure("failed writing " + path);
}

NetworkState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    if (bytes.size() < 4 + sizeof(std::uint32_t) + sizeof(std::uint64_t))
        throw CorruptCheckpoint(path + ": too short");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw CorruptCheckpoint(path + ": bad magic");
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored),
                sizeof(stored));
    std::string body = bytes.substr(0, bytes.size() - sizeof(stored));
    if (fnv1a(body) != stored)
        throw CorruptCheckpoint(path + ": checksum mismatch");

    std::size_t pos = 4;
    auto version = take<std::uint32_t>(body, pos);
    if (version != kCheckpointVersion)
        throw VersionMismatch(path + ": checkpoint version " +
                              std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    NetworkState state;
    state.hyper.depth = take<std::int32_t>(body, pos);
    state.hyper.extent = take<std::uint32_t>(body, pos);
    state.hyper.signal_channels = take<std::uint32_t>(body, pos);
    state.hyper.w1 = take<std::uint32_t>(body, pos);
    state.hyper.w2 = take<std::uint32_t>(body, pos);
    state.hyper.w3 = take<std::uint32_t>(body, pos);
    state.hyper.activation_slope = take<double>(body, pos);
    auto prov_len = take<std::uint32_t>(body, pos);
    if (pos + prov_len > body.size())
        throw CorruptCheckpoint(path + ": truncated provenance");
    state.provenance = body.substr(pos, prov_len);
    pos += prov_len;
    auto count = take<std::uint32_t>(body, pos);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name_len = take<std::uint16_t>(body, pos);
        if (pos + name_len > body.size())
            throw CorruptCheckpoint(path + ": truncated tensor name");
        std::string name = body.substr(pos, name_len);
        pos += name_len;
        auto rows = take<std::uint64_t>(body, pos);
        auto cols = take<std::uint64_t>(body, pos);
        Tensor t(rows, cols);
        if (pos + t.data.size() * sizeof(double) > body.size())
            throw CorruptCheckpoint(path + ": truncated tensor data");
        std::memcpy(t.data.data(), body.data() + pos,
                    t.data.size() * sizeof(double));
        pos += t.data.size() * sizeof(double);
        if (!t.finite()) throw CorruptCheckpoint(path + ": non-finite tensor " + name);
        state.params.emplace(std::move(name), std::move(t));
    }
    return state;
}

}  // namespace surfrec
