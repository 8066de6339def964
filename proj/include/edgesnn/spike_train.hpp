#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"

namespace edgesnn {

/// Time-major binary record of which neuron fired at which timestep.
class SpikeTrain {
public:
    SpikeTrain() = default;
    SpikeTrain(std::size_t n_neurons, std::size_t n_timesteps)
        : n_neurons_(n_neurons), n_timesteps_(n_timesteps), bits_(n_neurons * n_timesteps, 0) {}

    std::size_t n_neurons() const { return n_neurons_; }
    std::size_t n_timesteps() const { return n_timesteps_; }
    bool empty() const { return n_neurons_ == 0 || n_timesteps_ == 0; }

    bool at(std::size_t t, std::size_t neuron) const {
        check(t, neuron);
        return bits_[t * n_neurons_ + neuron] != 0;
    }
    void set(std::size_t t, std::size_t neuron, bool fired = true) {
        check(t, neuron);
        bits_[t * n_neurons_ + neuron] = fired ? 1 : 0;
    }

    std::span<const std::uint8_t> step(std::size_t t) const {
        return {bits_.data() + t * n_neurons_, n_neurons_};
    }
    std::span<std::uint8_t> step(std::size_t t) { return {bits_.data() + t * n_neurons_, n_neurons_}; }

    std::uint64_t total_spikes() const {
        return std::accumulate(bits_.begin(), bits_.end(), std::uint64_t{0});
    }

    /// Spike count per neuron over the whole horizon.
    std::vector<std::uint64_t> counts() const {
        std::vector<std::uint64_t> c(n_neurons_, 0);
        for (std::size_t t = 0; t < n_timesteps_; ++t)
            for (std::size_t n = 0; n < n_neurons_; ++n) c[n] += bits_[t * n_neurons_ + n];
        return c;
    }

    std::optional<std::size_t> first_spike(std::size_t neuron) const {
        for (std::size_t t = 0; t < n_timesteps_; ++t)
            if (bits_[t * n_neurons_ + neuron]) return t;
        return std::nullopt;
    }

    bool operator==(const SpikeTrain&) const = default;

private:
    void check(std::size_t t, std::size_t neuron) const {
        if (t >= n_timesteps_ || neuron >= n_neurons_)
            throw ShapeError("spike event (t=" + std::to_string(t) + ", neuron=" + std::to_string(neuron) +
                             ") outside train of " + std::to_string(n_neurons_) + " neurons x " +
                             std::to_string(n_timesteps_) + " timesteps");
    }

    std::size_t n_neurons_ = 0;
    std::size_t n_timesteps_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Event text format:
//   # neurons=N timesteps=T
//   t neuron_id
// Events are written in (t, neuron) order.

inline void write_spike_train(std::ostream& os, const SpikeTrain& train) {
    os << "# neurons=" << train.n_neurons() << " timesteps=" << train.n_timesteps() << '\n';
    for (std::size_t t = 0; t < train.n_timesteps(); ++t) {
        auto row = train.step(t);
        for (std::size_t n = 0; n < row.size(); ++n)
            if (row[n]) os << t << ' ' << n << '\n';
    }
}

inline SpikeTrain read_spike_train(std::istream& is, const std::string& source = "<spike train>") {
    std::string line;
    std::size_t line_no = 0;
    std::optional<SpikeTrain> train;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (train) continue;
            std::size_t n = 0, t = 0;
            if (std::sscanf(line.c_str(), "# neurons=%zu timesteps=%zu", &n, &t) != 2)
                throw ParseError(source, line_no, "expected header '# neurons=N timesteps=T'");
            train.emplace(n, t);
            continue;
        }
        if (!train) throw ParseError(source, line_no, "event before header");
        std::istringstream ss(line);
        long long t = -1, n = -1;
        if (!(ss >> t >> n) || t < 0 || n < 0)
            throw ParseError(source, line_no, "expected 't neuron_id'");
        if (static_cast<std::size_t>(t) >= train->n_timesteps() ||
            static_cast<std::size_t>(n) >= train->n_neurons())
            throw ParseError(source, line_no, "event out of range");
        train->set(static_cast<std::size_t>(t), static_cast<std::size_t>(n));
    }
    if (!train) throw ParseError(source, line_no, "missing header");
    return std::move(*train);
}

} // namespace edgesnn
