#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/rng.hpp"

namespace edgesnn {

enum class ResetMode { subtract, hard };

inline const char* to_string(ResetMode m) { return m == ResetMode::subtract ? "subtract" : "hard"; }

/// Leaky integrate-and-fire parameters shared by every neuron of a layer.
/// `beta` is the per-step decay exp(-dt/tau_m); resting potential is 0 and the
/// membrane resistance is folded into the weights.
struct NeuronParams {
    double beta = 0.9;
    double v_th = 1.0;
    double v_reset = 0.0; // hard reset only
    ResetMode reset = ResetMode::subtract;

    void validate(const std::string& where = "neuron params") const {
        if (!(beta > 0.0 && beta <= 1.0))
            throw ValueError(where + ": beta must lie in (0, 1], got " + std::to_string(beta));
        if (!(v_th > 0.0) || !std::isfinite(v_th))
            throw ValueError(where + ": v_th must be positive, got " + std::to_string(v_th));
        if (!std::isfinite(v_reset)) throw ValueError(where + ": v_reset must be finite");
    }

    bool operator==(const NeuronParams&) const = default;
};

enum class LayerKind { dense, conv2d, pool2x2 };

inline const char* to_string(LayerKind k) {
    switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::pool2x2: return "pool2x2";
    }
    return "?";
}

/// Valid (unpadded) stride-1 convolution geometry.
struct ConvShape {
    std::size_t in_channels = 1;
    std::size_t in_height = 1;
    std::size_t in_width = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 1;

    std::size_t out_height() const { return in_height + 1 - kernel; }
    std::size_t out_width() const { return in_width + 1 - kernel; }
    std::size_t n_in() const { return in_channels * in_height * in_width; }
    std::size_t n_out() const { return out_channels * out_height() * out_width(); }
    std::size_t kernel_size() const { return out_channels * in_channels * kernel * kernel; }

    bool operator==(const ConvShape&) const = default;
};

struct PoolShape {
    std::size_t channels = 1;
    std::size_t in_height = 2;
    std::size_t in_width = 2;

    std::size_t out_height() const { return in_height / 2; }
    std::size_t out_width() const { return in_width / 2; }
    std::size_t n_in() const { return channels * in_height * in_width; }
    std::size_t n_out() const { return channels * out_height() * out_width(); }

    bool operator==(const PoolShape&) const = default;
};

/// One layer of the network. Dense and conv layers simulate from the dense
/// row-major `weights` matrix (n_out x n_in); a conv layer's matrix is the
/// lowering of `kernel` and must be rebuilt with lower_conv() after the kernel
/// changes. Pool layers have neither weights nor neuron parameters: an output
/// fires when any of its 2x2 children fired.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::vector<double> weights;
    std::vector<double> kernel;
    NeuronParams params;
    ConvShape conv;
    PoolShape pool;

    // Structural fan-out (CSR over inputs) for conv and pool layers.
    std::vector<std::uint32_t> fan_offsets;
    std::vector<std::uint32_t> fan_targets;
    std::vector<std::uint32_t> fan_kernel; // conv: kernel index of each synapse

    bool has_weights() const { return kind != LayerKind::pool2x2; }
    bool is_lif() const { return kind != LayerKind::pool2x2; }

    double& weight(std::size_t out, std::size_t in) { return weights[out * n_in + in]; }
    double weight(std::size_t out, std::size_t in) const { return weights[out * n_in + in]; }

    std::size_t fan_out(std::size_t in) const {
        if (kind == LayerKind::dense) return n_out;
        return fan_offsets[in + 1] - fan_offsets[in];
    }

    /// Calls f(target) for every structural synapse leaving input `in`.
    template <class F>
    void for_each_target(std::size_t in, F&& f) const {
        if (kind == LayerKind::dense) {
            for (std::size_t i = 0; i < n_out; ++i) f(i);
            return;
        }
        for (std::uint32_t e = fan_offsets[in]; e < fan_offsets[in + 1]; ++e) f(std::size_t{fan_targets[e]});
    }

    std::size_t n_synapses() const { return kind == LayerKind::dense ? n_in * n_out : fan_targets.size(); }
};

/// Rebuilds the dense weight matrix of a conv layer from its kernel.
inline void lower_conv(LayerSpec& layer) {
    if (layer.kind != LayerKind::conv2d) return;
    layer.weights.assign(layer.n_out * layer.n_in, 0.0);
    for (std::size_t j = 0; j < layer.n_in; ++j)
        for (std::uint32_t e = layer.fan_offsets[j]; e < layer.fan_offsets[j + 1]; ++e)
            layer.weights[layer.fan_targets[e] * layer.n_in + j] = layer.kernel[layer.fan_kernel[e]];
}

namespace detail {

inline void build_conv_fanout(LayerSpec& l) {
    const ConvShape& s = l.conv;
    const std::size_t oh = s.out_height(), ow = s.out_width(), k = s.kernel;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_in(l.n_in);
    for (std::size_t o = 0; o < s.out_channels; ++o)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t i = (o * oh + oy) * ow + ox;
                for (std::size_t c = 0; c < s.in_channels; ++c)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::size_t j = (c * s.in_height + oy + ky) * s.in_width + ox + kx;
                            const std::size_t kidx = ((o * s.in_channels + c) * k + ky) * k + kx;
                            per_in[j].emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(kidx));
                        }
            }
    l.fan_offsets.assign(1, 0);
    l.fan_targets.clear();
    l.fan_kernel.clear();
    for (const auto& targets : per_in) {
        for (auto [i, kidx] : targets) {
            l.fan_targets.push_back(i);
            l.fan_kernel.push_back(kidx);
        }
        l.fan_offsets.push_back(static_cast<std::uint32_t>(l.fan_targets.size()));
    }
}

inline void build_pool_fanout(LayerSpec& l) {
    const PoolShape& s = l.pool;
    const std::size_t oh = s.out_height(), ow = s.out_width();
    l.fan_offsets.assign(1, 0);
    l.fan_targets.clear();
    l.fan_kernel.clear();
    for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t y = 0; y < s.in_height; ++y)
            for (std::size_t x = 0; x < s.in_width; ++x) {
                if (y / 2 < oh && x / 2 < ow)
                    l.fan_targets.push_back(static_cast<std::uint32_t>((c * oh + y / 2) * ow + x / 2));
                l.fan_offsets.push_back(static_cast<std::uint32_t>(l.fan_targets.size()));
            }
}

} // namespace detail

inline LayerSpec dense_layer(std::size_t n_in, std::size_t n_out, NeuronParams params = {}) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.n_in = n_in;
    l.n_out = n_out;
    l.weights.assign(n_in * n_out, 0.0);
    l.params = params;
    return l;
}

inline LayerSpec conv2d_layer(const ConvShape& shape, NeuronParams params = {}) {
    if (shape.kernel == 0 || shape.kernel > shape.in_height || shape.kernel > shape.in_width)
        throw ShapeError("conv2d: kernel " + std::to_string(shape.kernel) + " does not fit input " +
                         std::to_string(shape.in_height) + "x" + std::to_string(shape.in_width));
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.conv = shape;
    l.n_in = shape.n_in();
    l.n_out = shape.n_out();
    l.kernel.assign(shape.kernel_size(), 0.0);
    l.params = params;
    detail::build_conv_fanout(l);
    lower_conv(l);
    return l;
}

inline LayerSpec pool2x2_layer(const PoolShape& shape) {
    if (shape.in_height < 2 || shape.in_width < 2) throw ShapeError("pool2x2: input smaller than 2x2");
    LayerSpec l;
    l.kind = LayerKind::pool2x2;
    l.pool = shape;
    l.n_in = shape.n_in();
    l.n_out = shape.n_out();
    detail::build_pool_fanout(l);
    return l;
}

struct NetworkTopology {
    std::vector<LayerSpec> layers;
    std::size_t n_timesteps = 1;

    std::size_t n_inputs() const { return layers.empty() ? 0 : layers.front().n_in; }
    std::size_t n_outputs() const { return layers.empty() ? 0 : layers.back().n_out; }

    /// Population sizes: inputs first, then each layer's outputs.
    std::vector<std::size_t> population_sizes() const {
        std::vector<std::size_t> p;
        p.push_back(n_inputs());
        for (const auto& l : layers) p.push_back(l.n_out);
        return p;
    }

    /// Offset of each population in the global neuron numbering.
    std::vector<std::size_t> population_offsets() const {
        std::vector<std::size_t> off;
        std::size_t acc = 0;
        for (std::size_t n : population_sizes()) {
            off.push_back(acc);
            acc += n;
        }
        off.push_back(acc);
        return off;
    }

    std::size_t n_neurons() const { return population_offsets().back(); }
};

/// Checks shape chaining, parameter ranges and weight finiteness.
inline void validate(const NetworkTopology& net) {
    if (net.layers.empty()) throw ShapeError("network has no layers");
    if (net.n_timesteps < 1) throw ValueError("network horizon must be at least 1 timestep");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const LayerSpec& l = net.layers[k];
        const std::string where = "layer " + std::to_string(k);
        if (k > 0 && net.layers[k - 1].n_out != l.n_in)
            throw ShapeError(where + ": expected n_in " + std::to_string(net.layers[k - 1].n_out) + ", got " +
                             std::to_string(l.n_in));
        switch (l.kind) {
        case LayerKind::dense:
            if (l.weights.size() != l.n_in * l.n_out)
                throw ShapeError(where + ": weight matrix has " + std::to_string(l.weights.size()) +
                                 " entries, expected " + std::to_string(l.n_out) + "x" + std::to_string(l.n_in));
            break;
        case LayerKind::conv2d:
            if (l.n_in != l.conv.n_in() || l.n_out != l.conv.n_out())
                throw ShapeError(where + ": conv geometry inconsistent with layer sizes");
            if (l.kernel.size() != l.conv.kernel_size() || l.weights.size() != l.n_in * l.n_out)
                throw ShapeError(where + ": conv kernel or lowered matrix has the wrong size");
            break;
        case LayerKind::pool2x2:
            if (l.n_in != l.pool.n_in() || l.n_out != l.pool.n_out())
                throw ShapeError(where + ": pool geometry inconsistent with layer sizes");
            if (!l.weights.empty()) throw ShapeError(where + ": pool layers carry no weights");
            break;
        }
        if (l.kind != LayerKind::dense && l.fan_offsets.size() != l.n_in + 1)
            throw ShapeError(where + ": connectivity not built");
        if (l.is_lif()) l.params.validate(where);
        for (double w : l.weights)
            if (!std::isfinite(w)) throw ValueError(where + ": non-finite weight");
        for (double w : l.kernel)
            if (!std::isfinite(w)) throw ValueError(where + ": non-finite kernel weight");
    }
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline void init_weights(NetworkTopology& net, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& l : net.layers) {
        if (l.kind == LayerKind::dense) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.n_in));
            for (double& w : l.weights) w = rng.uniform(-bound, bound);
        } else if (l.kind == LayerKind::conv2d) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.conv.in_channels * l.conv.kernel * l.conv.kernel));
            for (double& w : l.kernel) w = rng.uniform(-bound, bound);
            lower_conv(l);
        }
    }
}

} // namespace edgesnn
