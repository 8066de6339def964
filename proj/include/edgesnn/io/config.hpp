#pragma once

// Flat `section.key = value` configuration with environment overrides.

#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "edgesnn/encoding.hpp"
#include "edgesnn/error.hpp"
#include "edgesnn/hardware_map.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/network.hpp"
#include "edgesnn/runtime_adapt.hpp"
#include "edgesnn/training.hpp"

namespace edgesnn::io {

inline constexpr const char* kEnvPrefix = "EDGESNN_";

/// Every setting a command may need. Module seeds are derived from `seed`.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string chip = "desk-16"; // preset name or chip file path
    std::string preset = "desk-mlp";
    std::string dataset;
    std::string test_dataset;
    std::string network;
    std::string mapping;
    std::string out = "out";
    bool adaptive = false;
    bool record_timing = false;
    std::size_t info_bins = 8;
    std::size_t random_baseline = 100; // random mappings drawn for the map report
    double init_rate = 0.1; // firing rate targeted by calibrate_init; 0 keeps the plain uniform init

    NeuronParams neuron;
    EncoderConfig encoder;
    TrainConfig train = [] {
        TrainConfig t;
        t.clip_norm = 1.0;
        return t;
    }();
    MapperConfig mapper;
    AdaptConfig adapt;

    void validate() const {
        try {
            neuron.validate("neuron");
            encoder.validate();
            train.validate();
            mapper.validate();
            adapt.validate();
        } catch (const ValueError& e) {
            throw ConfigError(e.what());
        }
        if (info_bins < 2) throw ConfigError("run.info_bins must be at least 2");
        if (!(init_rate >= 0.0 && init_rate < 1.0)) throw ConfigError("run.init_rate must lie in [0, 1)");
        if (random_baseline < 1) throw ConfigError("run.random_baseline must be at least 1");
    }
};

struct ConfigField {
    std::string key;
    std::string doc;
    std::function<std::string()> get;
    std::function<bool(std::string_view)> set; // false when the value does not parse
};

namespace detail {

template <class T>
ConfigField number_field(std::string key, T& ref, std::string doc) {
    return {std::move(key), std::move(doc),
            [&ref] {
                if constexpr (std::is_floating_point_v<T>)
                    return fmt(ref);
                else
                    return std::to_string(ref);
            },
            [&ref](std::string_view v) { return parse_number(v, ref); }};
}

inline ConfigField string_field(std::string key, std::string& ref, std::string doc) {
    return {std::move(key), std::move(doc), [&ref] { return ref; },
            [&ref](std::string_view v) {
                ref = trim(v);
                return true;
            }};
}

inline std::optional<bool> parse_bool(std::string_view v) {
    const auto t = trim(v);
    if (t == "on" || t == "true" || t == "1" || t == "yes") return true;
    if (t == "off" || t == "false" || t == "0" || t == "no") return false;
    return std::nullopt;
}

inline ConfigField bool_field(std::string key, bool& ref, std::string doc) {
    return {std::move(key), std::move(doc), [&ref] { return std::string(ref ? "on" : "off"); },
            [&ref](std::string_view v) {
                const auto b = parse_bool(v);
                if (b) ref = *b;
                return b.has_value();
            }};
}

template <class E>
ConfigField enum_field(std::string key, E& ref, std::vector<E> values, std::string doc) {
    return {std::move(key), std::move(doc), [&ref] { return std::string(to_string(ref)); },
            [&ref, values](std::string_view v) {
                const auto t = trim(v);
                for (E e : values)
                    if (t == to_string(e)) {
                        ref = e;
                        return true;
                    }
                return false;
            }};
}

} // namespace detail

/// The full key table bound to `c`.
inline std::vector<ConfigField> config_fields(RunConfig& c) {
    using namespace detail;
    return {
        number_field("run.seed", c.seed, "global seed; every module seed derives from it"),
        string_field("run.chip", c.chip, "chip preset (loihi2-like, truenorth-like, desk-16) or chip file"),
        string_field("run.preset", c.preset, "network preset: desk-mlp or desk-cnn"),
        string_field("run.dataset", c.dataset, "training dataset file"),
        string_field("run.test_dataset", c.test_dataset, "test dataset file"),
        string_field("run.network", c.network, "network file (map, run)"),
        string_field("run.mapping", c.mapping, "mapping file (run); empty maps on the fly"),
        string_field("run.out", c.out, "output directory"),
        bool_field("run.adaptive", c.adaptive, "runtime threshold adaptation during run"),
        bool_field("run.record_timing", c.record_timing, "write wall-clock stage timings into artifacts"),
        number_field("run.info_bins", c.info_bins, "input bins for the spike-efficiency estimate"),
        number_field("run.random_baseline", c.random_baseline, "random mappings drawn as the map baseline"),
        number_field("run.init_rate", c.init_rate, "per-neuron firing rate the initial weights are calibrated to; 0 disables"),
        number_field("neuron.beta", c.neuron.beta, "membrane decay per step"),
        number_field("neuron.v_th", c.neuron.v_th, "firing threshold"),
        number_field("neuron.v_reset", c.neuron.v_reset, "reset potential (hard reset)"),
        enum_field("neuron.reset", c.neuron.reset, {ResetMode::subtract, ResetMode::hard}, "subtract or hard"),
        enum_field("encoder.scheme", c.encoder.scheme,
                   {EncodingScheme::rate, EncodingScheme::latency, EncodingScheme::hybrid}, "rate, latency or hybrid"),
        number_field("encoder.timesteps", c.encoder.timesteps, "simulation horizon T"),
        number_field("encoder.alpha", c.encoder.alpha, "hybrid threshold modulation"),
        number_field("encoder.v_th_base", c.encoder.v_th_base, "hybrid integrator threshold"),
        number_field("train.epochs", c.train.epochs, "training epochs"),
        number_field("train.batch_size", c.train.batch_size, "minibatch size"),
        number_field("train.learning_rate", c.train.learning_rate, "SGD step size"),
        number_field("train.lambda_hw", c.train.lambda_hw, "hardware loss weight"),
        number_field("train.clip_norm", c.train.clip_norm, "gradient norm cap, 0 for plain SGD"),
        number_field("train.surrogate_width", c.train.surrogate_width, "boxcar half-width in threshold units"),
        enum_field("train.grad_mode", c.train.grad_mode, {GradMode::hard_forward, GradMode::smooth_forward},
                   "hard_forward or smooth_forward"),
        number_field("mapper.beta1", c.mapper.beta1, "weight of the cores-used term"),
        number_field("mapper.beta2", c.mapper.beta2, "weight of the inter-core synapse term"),
        number_field("mapper.beta3", c.mapper.beta3, "weight of the synaptic memory term"),
        number_field("mapper.max_iters", c.mapper.max_iters, "local-search move budget"),
        number_field("adapt.a_target", c.adapt.a_target, "target spikes per neuron per step"),
        number_field("adapt.gamma", c.adapt.gamma, "adaptation rate"),
        number_field("adapt.th_min", c.adapt.th_min, "lower clamp, multiple of the base threshold"),
        number_field("adapt.th_max", c.adapt.th_max, "upper clamp, multiple of the base threshold"),
        number_field("adapt.window", c.adapt.window, "activity smoothing window in steps"),
        enum_field("adapt.mode", c.adapt.mode, {AdaptMode::energy_saving, AdaptMode::homeostatic},
                   "energy_saving or homeostatic"),
    };
}

inline std::string env_name(std::string_view key) {
    std::string s = kEnvPrefix;
    for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

/// Sets one key. Returns an error description, or nothing on success.
inline std::optional<std::string> try_set_key(RunConfig& c, std::string_view key, std::string_view value) {
    for (auto& f : config_fields(c))
        if (f.key == key) {
            if (f.set(value)) return std::nullopt;
            return "bad value '" + trim(value) + "' for " + std::string(key) + " (" + f.doc + ")";
        }
    return "unknown key '" + std::string(key) + "'";
}

inline void set_key(RunConfig& c, std::string_view key, std::string_view value, const std::string& where) {
    if (auto err = try_set_key(c, key, value)) throw ConfigError(where + ": " + *err);
}

/// Applies `key = value` lines; '#' starts a comment. A value that parses but
/// breaks validation is reported at the first line that made the config invalid.
inline void apply_config_text(RunConfig& c, std::string_view text, const std::string& file) {
    const RunConfig start = c;
    std::vector<std::tuple<std::string, std::string, std::size_t>> lines;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(file, n, "expected 'key = value'");
        const auto key = trim(std::string_view(t).substr(0, eq));
        const auto value = trim(std::string_view(t).substr(eq + 1));
        if (auto err = try_set_key(c, key, value)) throw ParseError(file, n, *err);
        lines.emplace_back(key, value, n);
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        RunConfig replay = start;
        for (const auto& [key, value, at] : lines) {
            try_set_key(replay, key, value);
            try {
                replay.validate();
            } catch (const ConfigError& err) {
                throw ParseError(file, at, err.what());
            }
        }
        throw ParseError(file + ": " + e.what());
    }
}

inline void apply_config_file(RunConfig& c, const std::string& path) { apply_config_text(c, read_file(path), path); }

/// Overrides from EDGESNN_SECTION_KEY variables. `getenv` is injectable for tests.
inline void apply_env(RunConfig& c, const std::function<const char*(const char*)>& getenv = [](const char* n) {
    return std::getenv(n);
}) {
    std::vector<std::pair<std::string, std::string>> found;
    for (const auto& f : config_fields(c))
        if (const char* v = getenv(env_name(f.key).c_str())) found.emplace_back(f.key, v);
    for (const auto& [key, value] : found) set_key(c, key, value, "environment variable " + env_name(key));
}

/// Every key with its current value and description, in `key = value` form.
inline void write_config(std::ostream& os, RunConfig c) {
    std::string section;
    for (const auto& f : config_fields(c)) {
        const auto s = f.key.substr(0, f.key.find('.'));
        if (s != section) {
            if (!section.empty()) os << '\n';
            section = s;
        }
        os << "# " << f.doc << '\n' << f.key << " = " << f.get() << '\n';
    }
}

} // namespace edgesnn::io
