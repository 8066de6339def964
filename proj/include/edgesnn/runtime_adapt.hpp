#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <ostream>
#include <span>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/simulator.hpp"

namespace edgesnn {

enum class AdaptMode {
    energy_saving, // threshold rises while activity is below target
    homeostatic,   // sign flipped: threshold falls while activity is below target
};

inline const char* to_string(AdaptMode m) { return m == AdaptMode::energy_saving ? "energy_saving" : "homeostatic"; }

/// Runtime threshold adaptation. Clamp bounds are multiples of each layer's
/// base threshold.
struct AdaptConfig {
    double a_target = 0.05; // spikes per neuron per step
    double gamma = 0.1;
    double th_min = 0.5;
    double th_max = 2.0;
    std::size_t window = 1; // activity averaged over this many most recent steps
    AdaptMode mode = AdaptMode::energy_saving;

    void validate() const {
        if (!(a_target > 0.0 && a_target < 1.0)) throw ValueError("adapt: a_target must lie in (0, 1)");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValueError("adapt: gamma must be finite and >= 0");
        if (!(th_min > 0.0 && th_min <= 1.0 && th_max >= 1.0 && th_min < th_max) || !std::isfinite(th_max))
            throw ValueError("adapt: need 0 < th_min <= 1 <= th_max with th_min < th_max");
        if (window == 0) throw ValueError("adapt: window must be at least 1");
    }
};

/// Mean spike rate of one layer, optionally smoothed over a window.
struct ActivityStat {
    double a_t = 0.0;
    std::size_t window = 1;
};

/// base * (1 + gamma * (A_target - A[t])), clamped to [th_min * base, th_max * base].
/// Homeostatic mode flips the sign of the activity error.
inline double adapt_threshold(double base, const ActivityStat& activity, const AdaptConfig& cfg) {
    if (!std::isfinite(base) || !(base > 0.0)) throw ValueError("adapt: base threshold must be positive");
    if (!(activity.a_t >= 0.0 && activity.a_t <= 1.0)) throw ValueError("adapt: activity must lie in [0, 1]");
    const double err = cfg.mode == AdaptMode::energy_saving ? cfg.a_target - activity.a_t : activity.a_t - cfg.a_target;
    const double th = base * (1.0 + cfg.gamma * err);
    return std::clamp(th, cfg.th_min * base, cfg.th_max * base);
}

struct ThresholdSample {
    std::size_t t = 0;
    std::size_t layer = 0;
    double a_t = 0.0;
    double v_th_used = 0.0;    // threshold in force at t
    double v_th_adapted = 0.0; // threshold for t + 1
};

/// Threshold policy for simulate(): each LIF layer's threshold for step t + 1
/// comes from its own output activity up to step t.
class AdaptivePolicy {
public:
    AdaptivePolicy(const NetworkTopology& net, const AdaptConfig& cfg) : net_(net), cfg_(cfg) {
        cfg_.validate();
        for (const auto& l : net.layers) {
            base_.push_back(l.is_lif() ? l.params.v_th : 1.0);
            current_.push_back(base_.back());
        }
        history_.resize(net.layers.size());
    }

    double threshold(std::size_t k, std::size_t, const LayerSpec&) const { return current_[k]; }

    void observe(std::size_t k, std::size_t t, std::span<const std::uint8_t> out) {
        if (!net_.layers[k].is_lif()) return;
        std::size_t fired = 0;
        for (auto s : out) fired += s;
        auto& h = history_[k];
        h.push_back(static_cast<double>(fired) / static_cast<double>(out.size()));
        if (h.size() > cfg_.window) h.pop_front();
        double a = 0.0;
        for (double x : h) a += x;
        a /= static_cast<double>(h.size());
        const double used = current_[k];
        current_[k] = adapt_threshold(base_[k], {a, cfg_.window}, cfg_);
        trajectory_.push_back({t, k, a, used, current_[k]});
        step_spikes_.resize(t + 1, 0);
        step_spikes_[t] += fired;
    }

    const std::vector<ThresholdSample>& trajectory() const { return trajectory_; }
    const std::vector<std::uint64_t>& spikes_per_step() const { return step_spikes_; }

private:
    const NetworkTopology& net_;
    AdaptConfig cfg_;
    std::vector<double> base_, current_;
    std::vector<std::deque<double>> history_;
    std::vector<ThresholdSample> trajectory_;
    std::vector<std::uint64_t> step_spikes_;
};

struct AdaptiveRun {
    RunResult result;
    std::vector<ThresholdSample> trajectory;
    std::vector<std::uint64_t> spikes_per_step; // spikes of all LIF layers at each step
};

inline AdaptiveRun run_adaptive(const NetworkTopology& net, const SpikeTrain& input, const AdaptConfig& cfg) {
    AdaptivePolicy policy(net, cfg);
    auto r = simulate(net, input, policy);
    auto steps = policy.spikes_per_step();
    steps.resize(net.n_timesteps, 0);
    return {std::move(r), policy.trajectory(), std::move(steps)};
}

/// CSV columns: t, layer, A_t, v_th_adapted.
inline void write_trajectory_csv(std::ostream& os, const std::vector<ThresholdSample>& trajectory) {
    os << "t,layer,A_t,v_th_adapted\n";
    for (const auto& s : trajectory) os << s.t << ',' << s.layer << ',' << io::fmt(s.a_t) << ',' << io::fmt(s.v_th_adapted) << '\n';
}

} // namespace edgesnn
