#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/rng.hpp"
#include "edgesnn/spike_train.hpp"

namespace edgesnn {

enum class EncodingScheme { rate, latency, hybrid };

inline const char* to_string(EncodingScheme s) {
    switch (s) {
    case EncodingScheme::rate: return "rate";
    case EncodingScheme::latency: return "latency";
    case EncodingScheme::hybrid: return "hybrid";
    }
    return "?";
}

struct EncoderConfig {
    EncodingScheme scheme = EncodingScheme::hybrid;
    std::size_t timesteps = 20;
    double alpha = 0.1;     // hybrid threshold modulation gain
    double v_th_base = 1.0; // hybrid integrator threshold
    std::uint64_t seed = 0; // rate coding only

    void validate() const {
        if (timesteps < 1) throw ValueError("encoder: timesteps must be at least 1");
        if (!(alpha >= 0.0 && alpha < 1.0)) throw ValueError("encoder: alpha must lie in [0, 1)");
        if (!(v_th_base > 0.0) || !std::isfinite(v_th_base)) throw ValueError("encoder: v_th_base must be positive");
    }
};

/// Throws if any value lies outside [0, 1]; the message lists the offending indices.
inline void check_normalized(std::span<const double> x) {
    std::string bad;
    std::size_t n_bad = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= 0.0 && x[i] <= 1.0) continue;
        if (n_bad++ < 16) bad += (bad.empty() ? "" : ", ") + std::to_string(i);
    }
    if (n_bad > 0)
        throw ValueError("input outside [0, 1] at indices " + bad + (n_bad > 16 ? ", ..." : "") + " (" +
                         std::to_string(n_bad) + " values)");
}

/// Bernoulli(x_i) spike per channel per step from the seeded generator.
inline SpikeTrain encode_rate(std::span<const double> x, const EncoderConfig& cfg) {
    cfg.validate();
    check_normalized(x);
    SpikeTrain train(x.size(), cfg.timesteps);
    Rng rng(cfg.seed);
    for (std::size_t t = 0; t < cfg.timesteps; ++t) {
        auto row = train.step(t);
        for (std::size_t i = 0; i < x.size(); ++i) row[i] = rng.uniform01() < x[i] ? 1 : 0;
    }
    return train;
}

/// Single spike at ceil(T * (1 - x)), clamped to [0, T-1]; x = 0 stays silent.
inline SpikeTrain encode_latency(std::span<const double> x, const EncoderConfig& cfg) {
    cfg.validate();
    check_normalized(x);
    SpikeTrain train(x.size(), cfg.timesteps);
    const double T = static_cast<double>(cfg.timesteps);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0) continue;
        double t = std::ceil(T * (1.0 - x[i]));
        t = std::clamp(t, 0.0, T - 1.0);
        train.set(static_cast<std::size_t>(t), i);
    }
    return train;
}

/// Input-modulated threshold v_th,base * (1 - alpha * x).
inline double hybrid_threshold(double x, const EncoderConfig& cfg) {
    return cfg.v_th_base * (1.0 - cfg.alpha * x);
}

/// Continuous crossing time of the hybrid integrator, in steps from the start of
/// step 0 (a value in (k-1, k] means the first spike lands on step k). Infinite for x = 0.
inline double hybrid_crossing_time(double x, const EncoderConfig& cfg) {
    if (x <= 0.0) return std::numeric_limits<double>::infinity();
    return hybrid_threshold(x, cfg) / (cfg.v_th_base * x) - 1.0;
}

/// Per-channel non-leaky integrator driven by v_th,base * x_i against the
/// modulated threshold, with subtractive reset. At most one spike per step.
inline SpikeTrain encode_hybrid(std::span<const double> x, const EncoderConfig& cfg) {
    cfg.validate();
    check_normalized(x);
    std::vector<double> threshold(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        threshold[i] = hybrid_threshold(x[i], cfg);
        if (!(threshold[i] > 0.0))
            throw ValueError("hybrid encoder: modulated threshold " + std::to_string(threshold[i]) + " at channel " +
                             std::to_string(i) + " is not positive; reduce alpha");
    }
    SpikeTrain train(x.size(), cfg.timesteps);
    std::vector<double> v(x.size(), 0.0);
    for (std::size_t t = 0; t < cfg.timesteps; ++t) {
        auto row = train.step(t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            v[i] += cfg.v_th_base * x[i];
            if (v[i] >= threshold[i]) {
                row[i] = 1;
                v[i] -= threshold[i];
            }
        }
    }
    return train;
}

inline SpikeTrain encode(std::span<const double> x, const EncoderConfig& cfg) {
    switch (cfg.scheme) {
    case EncodingScheme::rate: return encode_rate(x, cfg);
    case EncodingScheme::latency: return encode_latency(x, cfg);
    case EncodingScheme::hybrid: return encode_hybrid(x, cfg);
    }
    throw ValueError("unknown encoding scheme");
}

/// Per-channel spike count divided by the horizon.
inline std::vector<double> decode_rate(const SpikeTrain& train) {
    std::vector<double> out(train.n_neurons(), 0.0);
    if (train.n_timesteps() == 0) return out;
    const auto counts = train.counts();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(counts[i]) / static_cast<double>(train.n_timesteps());
    return out;
}

/// Plug-in (maximum-likelihood histogram) estimate of I(A; B) in bits.
inline double plugin_mutual_information(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
    if (a.size() != b.size()) throw ShapeError("mutual information: sample sizes differ");
    if (a.empty()) throw ValueError("mutual information: empty sample");
    std::map<std::int64_t, double> pa, pb;
    std::map<std::pair<std::int64_t, std::int64_t>, double> pab;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
        pab[{a[i], b[i]}] += 1.0;
    }
    double mi = 0.0;
    for (const auto& [key, c] : pab) {
        const double p = c / n;
        mi += p * std::log2(c * n / (pa[key.first] * pb[key.second]));
    }
    return mi > 0.0 ? mi : 0.0;
}

struct EfficiencyReport {
    double mutual_info_bits = 0.0; // mean per-channel I(X; S)
    std::uint64_t n_spikes = 0;    // total spikes over the sample
    double eta = 0.0;              // bits per spike
};

/// Histogram bin of a normalized value.
inline std::int64_t value_bin(double x, std::size_t bins) {
    auto b = static_cast<std::int64_t>(std::floor(x * static_cast<double>(bins)));
    return std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(bins) - 1);
}

/// Estimates I(X; S) per channel between the binned input value and the
/// channel's spike count, averages across channels and divides by the total
/// number of spikes in the sample.
inline EfficiencyReport spike_efficiency(std::span<const std::vector<double>> inputs, std::span<const SpikeTrain> trains,
                                         std::size_t bins) {
    if (inputs.empty()) throw ValueError("spike efficiency: empty sample");
    if (inputs.size() != trains.size()) throw ShapeError("spike efficiency: inputs and trains are not aligned");
    if (bins < 2) throw ValueError("spike efficiency: need at least 2 bins");
    const std::size_t channels = inputs.front().size();
    for (std::size_t s = 0; s < inputs.size(); ++s)
        if (inputs[s].size() != channels || trains[s].n_neurons() != channels)
            throw ShapeError("spike efficiency: sample " + std::to_string(s) + " has a different channel count");

    EfficiencyReport r;
    std::vector<std::vector<std::uint64_t>> counts;
    counts.reserve(trains.size());
    for (const auto& tr : trains) {
        counts.push_back(tr.counts());
        r.n_spikes += tr.total_spikes();
    }
    if (channels == 0) return r;

    std::vector<std::int64_t> xs(inputs.size()), ss(inputs.size());
    double total = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t s = 0; s < inputs.size(); ++s) {
            xs[s] = value_bin(inputs[s][c], bins);
            ss[s] = static_cast<std::int64_t>(counts[s][c]);
        }
        total += plugin_mutual_information(xs, ss);
    }
    r.mutual_info_bits = total / static_cast<double>(channels);
    r.eta = r.n_spikes > 0 ? r.mutual_info_bits / static_cast<double>(r.n_spikes) : 0.0;
    return r;
}

/// Fraction of decoded channels within `tolerance` of their source value.
inline double decode_fidelity(std::span<const std::vector<double>> inputs, std::span<const SpikeTrain> trains,
                              double tolerance) {
    std::size_t ok = 0, total = 0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const auto xhat = decode_rate(trains[s]);
        for (std::size_t c = 0; c < xhat.size(); ++c) {
            ok += std::abs(xhat[c] - inputs[s][c]) <= tolerance ? 1 : 0;
            ++total;
        }
    }
    return total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0;
}

/// Mean absolute rate-decoding error over all channels of all samples.
inline double decode_error(std::span<const std::vector<double>> inputs, std::span<const SpikeTrain> trains) {
    double err = 0.0;
    std::size_t total = 0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const auto xhat = decode_rate(trains[s]);
        for (std::size_t c = 0; c < xhat.size(); ++c, ++total) err += std::abs(xhat[c] - inputs[s][c]);
    }
    return total ? err / static_cast<double>(total) : 0.0;
}

/// Encodes every sample, deriving a distinct rate-coding seed per sample.
inline std::vector<SpikeTrain> encode_all(std::span<const std::vector<double>> inputs, const EncoderConfig& cfg) {
    std::vector<SpikeTrain> out;
    out.reserve(inputs.size());
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        EncoderConfig c = cfg;
        c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(s));
        out.push_back(encode(inputs[s], c));
    }
    return out;
}

/// Smallest horizon in [1, max_timesteps] at which the rate-decoded fidelity
/// (fraction of channels within `tolerance`) reaches `coverage`; 0 if none does.
inline std::size_t matched_horizon(std::span<const std::vector<double>> inputs, EncoderConfig cfg, double tolerance,
                                   double coverage, std::size_t max_timesteps) {
    for (std::size_t T = 1; T <= max_timesteps; ++T) {
        cfg.timesteps = T;
        const auto trains = encode_all(inputs, cfg);
        if (decode_fidelity(inputs, trains, tolerance) >= coverage) return T;
    }
    return 0;
}

/// Smallest horizon in [1, max_timesteps] whose mean decoding error is at most
/// `max_error`; 0 if none is.
inline std::size_t horizon_for_error(std::span<const std::vector<double>> inputs, EncoderConfig cfg, double max_error,
                                     std::size_t max_timesteps) {
    for (std::size_t T = 1; T <= max_timesteps; ++T) {
        cfg.timesteps = T;
        if (decode_error(inputs, encode_all(inputs, cfg)) <= max_error) return T;
    }
    return 0;
}

} // namespace edgesnn
