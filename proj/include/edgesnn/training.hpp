#pragma once

// Surrogate-gradient backpropagation through time for LIF networks, trained
// jointly with a core mapping by alternating SGD epochs and mapper refreshes.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/hardware_map.hpp"
#include "edgesnn/network.hpp"
#include "edgesnn/rng.hpp"
#include "edgesnn/simulator.hpp"
#include "edgesnn/spike_train.hpp"

namespace edgesnn {

enum class GradMode {
    hard_forward,   // binary spikes forward, boxcar derivative backward
    smooth_forward, // sigmoid spikes forward, exact sigmoid derivative backward
};

inline const char* to_string(GradMode m) { return m == GradMode::hard_forward ? "hard_forward" : "smooth_forward"; }

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double learning_rate = 0.05;
    double lambda_hw = 0.1;
    double surrogate_width = 0.5; // boxcar half-width in units of the layer threshold
    GradMode grad_mode = GradMode::hard_forward;
    double smooth_steepness = 0.0; // sigmoid slope factor; 0 picks 2 / width so the slopes match at threshold
    double clip_norm = 0.0;        // cap on the L2 norm of the batch-mean gradient; 0 disables
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs == 0) throw ValueError("train: epochs must be positive");
        if (batch_size == 0) throw ValueError("train: batch_size must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ValueError("train: learning_rate must be positive");
        if (!(lambda_hw >= 0.0) || !std::isfinite(lambda_hw)) throw ValueError("train: lambda_hw must be >= 0");
        if (!(surrogate_width > 0.0) || !std::isfinite(surrogate_width))
            throw ValueError("train: surrogate_width must be positive");
        if (!(smooth_steepness >= 0.0) || !std::isfinite(smooth_steepness))
            throw ValueError("train: smooth_steepness must be >= 0");
        if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) throw ValueError("train: clip_norm must be >= 0");
    }
};

struct LossBreakdown {
    double task_loss = 0.0;
    double hw_loss = 0.0;
    double total = 0.0;
};

inline LossBreakdown make_loss(double task, double hw, double lambda_hw) {
    LossBreakdown l{task, hw, task + lambda_hw * hw};
    if (!std::isfinite(l.task_loss) || !std::isfinite(l.hw_loss) || !std::isfinite(l.total))
        throw ValueError("loss is not finite");
    return l;
}

/// Everything the backward pass needs from one forward pass. Per layer,
/// timestep-major: x (layer input), u (potential before reset) and s (output).
struct Trace {
    GradMode mode = GradMode::hard_forward;
    std::size_t timesteps = 0;
    std::vector<std::vector<double>> x, u, s;
    std::vector<double> counts; // output spike counts (soft counts in smooth mode)
};

namespace detail {

// A pool layer behaves like a LIF layer with beta 0, threshold 1 and unit weights.
inline double layer_threshold(const LayerSpec& l) { return l.is_lif() ? l.params.v_th : 1.0; }
inline double layer_beta(const LayerSpec& l) { return l.is_lif() ? l.params.beta : 0.0; }

inline double steepness(const LayerSpec& l, const TrainConfig& cfg) {
    const double w = cfg.surrogate_width * layer_threshold(l);
    return cfg.smooth_steepness > 0.0 ? cfg.smooth_steepness / layer_threshold(l) : 2.0 / w;
}

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// ds/du at potential u.
inline double spike_derivative(const LayerSpec& l, double u, const TrainConfig& cfg, GradMode mode) {
    const double th = layer_threshold(l);
    if (mode == GradMode::smooth_forward) {
        const double k = steepness(l, cfg);
        const double p = sigmoid(k * (u - th));
        return k * p * (1.0 - p);
    }
    const double w = cfg.surrogate_width * th;
    return std::abs(u - th) <= w ? 1.0 / (2.0 * w) : 0.0;
}

} // namespace detail

/// Forward pass that records a trace. In hard_forward mode the output is
/// bit-identical to run_network: potentials accumulate in the same order.
inline std::pair<SpikeTrain, Trace> forward_with_trace(const NetworkTopology& net, const SpikeTrain& input,
                                                       const TrainConfig& cfg) {
    validate(net);
    cfg.validate();
    check_input(net, input);
    const std::size_t T = net.n_timesteps;
    const std::size_t L = net.layers.size();

    Trace tr;
    tr.mode = cfg.grad_mode;
    tr.timesteps = T;
    tr.x.resize(L);
    tr.u.resize(L);
    tr.s.resize(L);
    for (std::size_t k = 0; k < L; ++k) {
        tr.x[k].assign(T * net.layers[k].n_in, 0.0);
        tr.u[k].assign(T * net.layers[k].n_out, 0.0);
        tr.s[k].assign(T * net.layers[k].n_out, 0.0);
    }
    tr.counts.assign(net.n_outputs(), 0.0);
    SpikeTrain out(net.n_outputs(), T);

    std::vector<std::vector<double>> v;
    for (const auto& l : net.layers) v.emplace_back(l.n_out, 0.0);
    const bool smooth = cfg.grad_mode == GradMode::smooth_forward;

    for (std::size_t t = 0; t < T; ++t) {
        const auto in = input.step(t);
        for (std::size_t j = 0; j < in.size(); ++j) tr.x[0][t * in.size() + j] = in[j] ? 1.0 : 0.0;
        for (std::size_t k = 0; k < L; ++k) {
            const LayerSpec& l = net.layers[k];
            const double* x = &tr.x[k][t * l.n_in];
            double* u = &tr.u[k][t * l.n_out];
            double* s = &tr.s[k][t * l.n_out];
            const double beta = detail::layer_beta(l), th = detail::layer_threshold(l);
            for (std::size_t i = 0; i < l.n_out; ++i) u[i] = v[k][i] * beta;
            for (std::size_t j = 0; j < l.n_in; ++j) {
                if (x[j] == 0.0) continue;
                if (l.kind == LayerKind::pool2x2)
                    l.for_each_target(j, [&](std::size_t i) { u[i] += x[j]; });
                else if (smooth)
                    l.for_each_target(j, [&](std::size_t i) { u[i] += l.weights[i * l.n_in + j] * x[j]; });
                else
                    l.for_each_target(j, [&](std::size_t i) { u[i] += l.weights[i * l.n_in + j]; });
            }
            const bool subtract = !l.is_lif() || l.params.reset == ResetMode::subtract;
            for (std::size_t i = 0; i < l.n_out; ++i) {
                s[i] = smooth ? detail::sigmoid(detail::steepness(l, cfg) * (u[i] - th)) : (u[i] >= th ? 1.0 : 0.0);
                if (subtract)
                    v[k][i] = smooth ? u[i] - th * s[i] : (s[i] != 0.0 ? u[i] - th : u[i]);
                else
                    v[k][i] = smooth ? u[i] * (1.0 - s[i]) + l.params.v_reset * s[i]
                                     : (s[i] != 0.0 ? l.params.v_reset : u[i]);
            }
            if (k + 1 < L) std::copy(s, s + l.n_out, &tr.x[k + 1][t * l.n_out]);
        }
        const double* s = &tr.s[L - 1][t * net.n_outputs()];
        for (std::size_t i = 0; i < net.n_outputs(); ++i) {
            tr.counts[i] += s[i];
            if (s[i] >= 0.5) out.set(t, i);
        }
    }
    return {std::move(out), std::move(tr)};
}

/// Softmax probabilities of the spike-count logits.
inline std::vector<double> softmax(const std::vector<double>& logits) {
    double m = logits.empty() ? 0.0 : logits[0];
    for (double z : logits) m = std::max(m, z);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - m);
    for (double& q : p) q /= z;
    return p;
}

/// Cross-entropy of the softmax over spike counts.
inline double task_loss(const Trace& tr, std::size_t target) {
    if (target >= tr.counts.size())
        throw ValueError("target class " + std::to_string(target) + " out of range for " +
                         std::to_string(tr.counts.size()) + " outputs");
    double m = tr.counts[0];
    for (double c : tr.counts) m = std::max(m, c);
    double z = 0.0;
    for (double c : tr.counts) z += std::exp(c - m);
    return std::log(z) + m - tr.counts[target];
}

/// Weight gradient per layer: dense layers use their matrix layout, conv layers
/// their kernel layout, pool layers are empty.
using Gradient = std::vector<std::vector<double>>;

inline Gradient zero_gradient(const NetworkTopology& net) {
    Gradient g;
    for (const auto& l : net.layers)
        g.emplace_back(l.kind == LayerKind::dense ? l.weights.size() : l.kind == LayerKind::conv2d ? l.kernel.size() : 0,
                       0.0);
    return g;
}

/// Exact BPTT gradient of the task loss through the surrogate-relaxed graph,
/// including the path through the reset. Accumulates into `grad`.
inline void backward(const NetworkTopology& net, const Trace& tr, std::size_t target, const TrainConfig& cfg,
                     Gradient& grad) {
    const std::size_t L = net.layers.size();
    if (tr.x.size() != L || tr.timesteps != net.n_timesteps || tr.counts.size() != net.n_outputs())
        throw ShapeError("trace does not belong to this network");
    if (grad.size() != L) throw ShapeError("gradient does not match the network");
    if (target >= net.n_outputs())
        throw ValueError("target class " + std::to_string(target) + " out of range for " +
                         std::to_string(net.n_outputs()) + " outputs");
    const std::size_t T = tr.timesteps;

    const auto p = softmax(tr.counts);
    std::vector<double> g_count(p);
    g_count[target] -= 1.0;

    // Per layer: dL/dv carried to the previous timestep, and scratch for dL/ds.
    std::vector<std::vector<double>> gv_next(L), gs(L);
    for (std::size_t k = 0; k < L; ++k) {
        gv_next[k].assign(net.layers[k].n_out, 0.0);
        gs[k].assign(net.layers[k].n_out, 0.0);
    }
    std::vector<double> gu;

    for (std::size_t t = T; t-- > 0;) {
        gs[L - 1] = g_count;
        for (std::size_t k = L; k-- > 0;) {
            const LayerSpec& l = net.layers[k];
            const double* x = &tr.x[k][t * l.n_in];
            const double* u = &tr.u[k][t * l.n_out];
            const double* s = &tr.s[k][t * l.n_out];
            const double th = detail::layer_threshold(l), beta = detail::layer_beta(l);
            const bool subtract = !l.is_lif() || l.params.reset == ResetMode::subtract;
            gu.assign(l.n_out, 0.0);
            for (std::size_t i = 0; i < l.n_out; ++i) {
                const double f = detail::spike_derivative(l, u[i], cfg, tr.mode);
                const double dv_du = subtract ? 1.0 - th * f : (1.0 - s[i]) + (l.params.v_reset - u[i]) * f;
                gu[i] = gs[k][i] * f + gv_next[k][i] * dv_du;
                gv_next[k][i] = beta * gu[i];
            }
            const bool need_gx = k > 0;
            if (need_gx) std::fill(gs[k - 1].begin(), gs[k - 1].end(), 0.0);
            for (std::size_t j = 0; j < l.n_in; ++j) {
                switch (l.kind) {
                case LayerKind::dense: {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < l.n_out; ++i) {
                        grad[k][i * l.n_in + j] += gu[i] * x[j];
                        acc += l.weights[i * l.n_in + j] * gu[i];
                    }
                    if (need_gx) gs[k - 1][j] = acc;
                    break;
                }
                case LayerKind::conv2d:
                    for (auto e = l.fan_offsets[j]; e < l.fan_offsets[j + 1]; ++e) {
                        const auto i = l.fan_targets[e];
                        grad[k][l.fan_kernel[e]] += gu[i] * x[j];
                        if (need_gx) gs[k - 1][j] += l.weights[i * l.n_in + j] * gu[i];
                    }
                    break;
                case LayerKind::pool2x2:
                    if (need_gx) l.for_each_target(j, [&](std::size_t i) { gs[k - 1][j] += gu[i]; });
                    break;
                }
            }
        }
    }
}

/// Applies w -= lr * g and re-lowers conv kernels.
inline double gradient_norm(const Gradient& grad) {
    double s = 0.0;
    for (const auto& g : grad)
        for (double x : g) s += x * x;
    return std::sqrt(s);
}

inline void sgd_step(NetworkTopology& net, const Gradient& grad, double lr) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& l = net.layers[k];
        if (l.kind == LayerKind::dense)
            for (std::size_t n = 0; n < l.weights.size(); ++n) l.weights[n] -= lr * grad[k][n];
        else if (l.kind == LayerKind::conv2d) {
            for (std::size_t n = 0; n < l.kernel.size(); ++n) l.kernel[n] -= lr * grad[k][n];
            lower_conv(l);
        }
    }
}

struct LabeledTrain {
    SpikeTrain input;
    std::size_t label = 0;
};
using SpikeDataset = std::vector<LabeledTrain>;

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown loss;           // task loss averaged over the epoch's training passes
    double train_acc = 0.0;       // hard evaluation after the epoch's updates
    std::optional<double> val_acc;
    double spikes_per_inference = 0.0; // network spikes, inputs excluded, on the training set
};

struct TrainResult {
    NetworkTopology net;
    Mapping mapping;
    std::vector<EpochRecord> history;
};

struct Evaluation {
    double accuracy = 0.0;
    double spikes_per_inference = 0.0;
};

/// Classification accuracy under run_network, counting low-confidence outputs as wrong.
inline Evaluation evaluate(const NetworkTopology& net, const SpikeDataset& data) {
    if (data.empty()) throw ValueError("evaluate: empty dataset");
    std::size_t correct = 0;
    std::uint64_t spikes = 0;
    for (const auto& d : data) {
        const auto r = run_network(net, d.input);
        const auto c = classify(r.output);
        correct += !c.low_confidence && c.index == d.label;
        spikes += r.state.network_spikes();
    }
    const double n = static_cast<double>(data.size());
    return {static_cast<double>(correct) / n, static_cast<double>(spikes) / n};
}

inline void check_dataset(const NetworkTopology& net, const SpikeDataset& data, const char* what) {
    for (std::size_t n = 0; n < data.size(); ++n) {
        try {
            check_input(net, data[n].input);
        } catch (const ShapeError& e) {
            throw ShapeError(std::string(what) + " sample " + std::to_string(n) + ": " + e.what());
        }
        if (data[n].label >= net.n_outputs())
            throw ValueError(std::string(what) + " sample " + std::to_string(n) + ": label " +
                             std::to_string(data[n].label) + " out of range for " + std::to_string(net.n_outputs()) +
                             " outputs");
    }
}

/// Alternating optimization: each epoch runs minibatch SGD on the task loss
/// with the mapping frozen (the hardware term does not depend on the weights),
/// then refreshes the mapping from the previous one. Fully deterministic.
inline constexpr double kCalibrationCap = 64.0;

/// Data-driven rescaling of an initialized network. Layer by layer, each
/// dense neuron's incoming row (or each conv output channel's kernel) is
/// multiplied by a factor found by geometric bisection so that its firing rate
/// on the first `max_samples` inputs reaches `target_rate` (the upper end of the
/// final bracket, so no neuron that can reach the target is left below it;
/// neurons that cannot reach it even at kCalibrationCap keep that cap). Without this,
/// deep stacks of unit-threshold neurons start silent or saturated, where the
/// boxcar surrogate is zero and no gradient flows. Returns the chosen factor
/// per weighted layer and group.
inline std::vector<std::vector<double>> calibrate_init(NetworkTopology& net, const SpikeDataset& data, double target_rate,
                           std::size_t max_samples = 32, int iterations = 24) {
    if (!(target_rate > 0.0 && target_rate < 1.0)) throw ValueError("calibrate_init: target rate must lie in (0, 1)");
    if (data.empty()) throw ValueError("calibrate_init: empty dataset");
    check_dataset(net, data, "calibration");
    const std::size_t m = std::min(data.size(), max_samples);
    std::vector<std::vector<double>> factors(net.layers.size());
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& l = net.layers[k];
        if (!l.has_weights()) continue;
        const bool dense = l.kind == LayerKind::dense;
        const std::size_t groups = dense ? l.n_out : l.conv.out_channels;
        auto& w = dense ? l.weights : l.kernel;
        const auto w0 = w;
        const std::size_t row = w.size() / groups, per_group = l.n_out / groups;
        std::vector<double> lo(groups, 1.0 / kCalibrationCap), hi(groups, kCalibrationCap);
        auto apply = [&](const std::vector<double>& scale) {
            for (std::size_t g = 0; g < groups; ++g)
                for (std::size_t i = 0; i < row; ++i) w[g * row + i] = w0[g * row + i] * scale[g];
            if (!dense) lower_conv(l);
        };
        std::vector<double> scale(groups);
        for (int it = 0; it < iterations; ++it) {
            for (std::size_t g = 0; g < groups; ++g) scale[g] = std::sqrt(lo[g] * hi[g]);
            apply(scale);
            std::vector<double> count(groups, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                const auto r = run_network(net, data[i].input);
                const auto& c = r.state.spike_counts[k + 1];
                for (std::size_t n = 0; n < c.size(); ++n) count[n / per_group] += static_cast<double>(c[n]);
            }
            const double denom = static_cast<double>(m * per_group * net.n_timesteps);
            for (std::size_t g = 0; g < groups; ++g) (count[g] / denom < target_rate ? lo[g] : hi[g]) = scale[g];
        }
        apply(hi);
        factors[k] = hi;
    }
    return factors;
}

inline TrainResult train(NetworkTopology net, const SpikeDataset& data, const SpikeDataset* val, const ChipModel& chip,
                         const TrainConfig& cfg, const MapperConfig& map_cfg) {
    cfg.validate();
    map_cfg.validate();
    validate(net);
    const auto graph = synapse_graph(net);
    check_feasible(graph, chip);
    if (data.empty()) throw ValueError("train: empty dataset");
    check_dataset(net, data, "training");
    if (val) check_dataset(net, *val, "validation");
    MapperConfig mc = map_cfg;
    mc.seed = derive_seed(cfg.seed, "mapper");
    Mapping mapping = map_optimize(graph, chip, mc, map_greedy(graph, chip));

    Rng rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double hw = hw_loss(mapping.stats, chip, mc);
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            Gradient grad = zero_gradient(net);
            for (std::size_t b = b0; b < b1; ++b) {
                const auto& d = data[order[b]];
                const auto fw = forward_with_trace(net, d.input, cfg);
                loss_sum += task_loss(fw.second, d.label);
                backward(net, fw.second, d.label, cfg, grad);
            }
            double step = cfg.learning_rate / static_cast<double>(b1 - b0);
            if (cfg.clip_norm > 0.0) {
                const double norm = gradient_norm(grad) / static_cast<double>(b1 - b0);
                if (norm > cfg.clip_norm) step *= cfg.clip_norm / norm;
            }
            sgd_step(net, grad, step);
        }
        validate(net);

        // Mapper refresh; starts from the current mapping, so never worse.
        mc.seed = derive_seed(derive_seed(cfg.seed, "mapper"), epoch);
        mapping = map_optimize(graph, chip, mc, mapping);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = make_loss(loss_sum / static_cast<double>(data.size()), hw, cfg.lambda_hw);
        const auto ev = evaluate(net, data);
        rec.train_acc = ev.accuracy;
        rec.spikes_per_inference = ev.spikes_per_inference;
        if (val && !val->empty()) rec.val_acc = evaluate(net, *val).accuracy;
        result.history.push_back(rec);
    }
    result.net = std::move(net);
    result.mapping = std::move(mapping);
    return result;
}

} // namespace edgesnn
