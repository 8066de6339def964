#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/network.hpp"
#include "edgesnn/spike_train.hpp"

namespace edgesnn {

/// Simulation state after (or during) one inference.
struct SimState {
    std::vector<std::vector<double>> v;                    // membrane potential per layer (empty for pool)
    std::vector<std::vector<std::uint64_t>> spike_counts;  // per population; [0] is the input population
    std::uint64_t sop_count = 0;
    std::uint64_t neuron_updates = 0;

    std::uint64_t input_spikes() const {
        return spike_counts.empty() ? 0 : std::accumulate(spike_counts[0].begin(), spike_counts[0].end(), std::uint64_t{0});
    }
    std::uint64_t total_spikes() const {
        std::uint64_t s = 0;
        for (const auto& pop : spike_counts) s = std::accumulate(pop.begin(), pop.end(), s);
        return s;
    }
    std::uint64_t network_spikes() const { return total_spikes() - input_spikes(); }

    /// Spike counts flattened in global neuron order.
    std::vector<std::uint64_t> flat_counts() const {
        std::vector<std::uint64_t> out;
        for (const auto& pop : spike_counts) out.insert(out.end(), pop.begin(), pop.end());
        return out;
    }
};

inline SimState make_state(const NetworkTopology& net) {
    SimState st;
    st.spike_counts.emplace_back(net.n_inputs(), 0);
    for (const auto& l : net.layers) {
        st.v.emplace_back(l.is_lif() ? l.n_out : 0, 0.0);
        st.spike_counts.emplace_back(l.n_out, 0);
    }
    return st;
}

/// Advances one layer by one timestep.
///
/// LIF layers compute u = beta * v + sum_j w_ij s_j, fire where u >= threshold and
/// then either subtract the threshold or jump to v_reset. Input contributions are
/// accumulated in ascending input order. One synaptic operation is charged per
/// structural synapse leaving each input spike. Pool layers fire when any child fired.
inline void step_layer(std::vector<double>& v, const LayerSpec& layer, std::span<const std::uint8_t> in,
                       std::span<std::uint8_t> out, double threshold, std::uint64_t& sop_count,
                       std::size_t layer_index = 0) {
    if (in.size() != layer.n_in || out.size() != layer.n_out)
        throw ShapeError("layer " + std::to_string(layer_index) + ": expected " + std::to_string(layer.n_in) +
                         " inputs and " + std::to_string(layer.n_out) + " outputs, got " + std::to_string(in.size()) +
                         " and " + std::to_string(out.size()));

    if (layer.kind == LayerKind::pool2x2) {
        std::fill(out.begin(), out.end(), std::uint8_t{0});
        for (std::size_t j = 0; j < in.size(); ++j) {
            if (!in[j]) continue;
            sop_count += layer.fan_out(j);
            layer.for_each_target(j, [&](std::size_t i) { out[i] = 1; });
        }
        return;
    }

    if (v.size() != layer.n_out) {
        if (!v.empty())
            throw ShapeError("layer " + std::to_string(layer_index) + ": state holds " + std::to_string(v.size()) +
                             " potentials, expected " + std::to_string(layer.n_out));
        v.assign(layer.n_out, 0.0);
    }

    const double beta = layer.params.beta;
    for (double& p : v) p *= beta;

    const double* w = layer.weights.data();
    const std::size_t n_in = layer.n_in;
    for (std::size_t j = 0; j < n_in; ++j) {
        if (!in[j]) continue;
        sop_count += layer.fan_out(j);
        layer.for_each_target(j, [&](std::size_t i) { v[i] += w[i * n_in + j]; });
    }

    const bool subtract = layer.params.reset == ResetMode::subtract;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] >= threshold) {
            out[i] = 1;
            v[i] = subtract ? v[i] - threshold : layer.params.v_reset;
        } else {
            out[i] = 0;
        }
    }
}

inline std::vector<std::uint8_t> step_layer(std::vector<double>& v, const LayerSpec& layer,
                                            std::span<const std::uint8_t> in, std::uint64_t& sop_count,
                                            std::size_t layer_index = 0) {
    std::vector<std::uint8_t> out(layer.n_out, 0);
    step_layer(v, layer, in, out, layer.params.v_th, sop_count, layer_index);
    return out;
}

/// Threshold policy that keeps every layer at its configured v_th.
struct StaticThresholds {
    double threshold(std::size_t, std::size_t, const LayerSpec& layer) const { return layer.params.v_th; }
    void observe(std::size_t, std::size_t, std::span<const std::uint8_t>) {}
};

struct RunResult {
    SpikeTrain output;
    SimState state;
};

inline void check_input(const NetworkTopology& net, const SpikeTrain& input) {
    if (input.n_neurons() != net.n_inputs())
        throw ShapeError("input train has " + std::to_string(input.n_neurons()) + " neurons, network expects " +
                         std::to_string(net.n_inputs()));
    if (input.n_timesteps() != net.n_timesteps)
        throw ShapeError("input train has " + std::to_string(input.n_timesteps()) + " timesteps, network expects " +
                         std::to_string(net.n_timesteps));
}

/// Runs the network over its full horizon. Potentials start at zero. The policy
/// supplies each layer's threshold per step and observes each layer's output.
template <class ThresholdPolicy>
RunResult simulate(const NetworkTopology& net, const SpikeTrain& input, ThresholdPolicy& policy) {
    validate(net);
    check_input(net, input);

    RunResult r{SpikeTrain(net.n_outputs(), net.n_timesteps), make_state(net)};
    SimState& st = r.state;
    std::vector<std::vector<std::uint8_t>> bufs;
    for (const auto& l : net.layers) bufs.emplace_back(l.n_out, 0);

    for (std::size_t t = 0; t < net.n_timesteps; ++t) {
        std::span<const std::uint8_t> in = input.step(t);
        for (std::size_t n = 0; n < in.size(); ++n) st.spike_counts[0][n] += in[n];
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            const LayerSpec& layer = net.layers[k];
            step_layer(st.v[k], layer, in, bufs[k], policy.threshold(k, t, layer), st.sop_count, k);
            if (layer.is_lif()) st.neuron_updates += layer.n_out;
            auto& counts = st.spike_counts[k + 1];
            for (std::size_t i = 0; i < layer.n_out; ++i) counts[i] += bufs[k][i];
            policy.observe(k, t, bufs[k]);
            in = bufs[k];
        }
        std::copy(in.begin(), in.end(), r.output.step(t).begin());
    }
    return r;
}

inline RunResult run_network(const NetworkTopology& net, const SpikeTrain& input) {
    StaticThresholds policy;
    return simulate(net, input, policy);
}

struct Classification {
    std::size_t index = 0;
    bool low_confidence = false; // no output neuron fired
};

/// Argmax of per-neuron spike counts, ties to the lowest index.
inline Classification classify(const SpikeTrain& output) {
    if (output.n_neurons() == 0) throw ShapeError("classify: output train has no neurons");
    const auto counts = output.counts();
    const auto it = std::max_element(counts.begin(), counts.end());
    return {static_cast<std::size_t>(it - counts.begin()), *it == 0};
}

} // namespace edgesnn
