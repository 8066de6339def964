#pragma once

// Desk-scale network presets. "desk-mlp" is a two-hidden-layer perceptron,
// "desk-cnn" a conv 8@3x3 -> pool -> dense 64 -> out stack on a square image.

#include <cmath>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/network.hpp"

namespace edgesnn {

inline NetworkTopology desk_mlp(std::size_t n_in, std::size_t n_out, const NeuronParams& p, std::size_t timesteps) {
    NetworkTopology net;
    net.n_timesteps = timesteps;
    net.layers = {dense_layer(n_in, 64, p), dense_layer(64, 32, p), dense_layer(32, n_out, p)};
    return net;
}

inline NetworkTopology desk_cnn(std::size_t n_in, std::size_t n_out, const NeuronParams& p, std::size_t timesteps) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n_in))));
    if (side * side != n_in || side < 4)
        throw ConfigError("desk-cnn needs a square single-channel input of side >= 4, got " + std::to_string(n_in) +
                          " features");
    NetworkTopology net;
    net.n_timesteps = timesteps;
    const ConvShape conv{1, side, side, 8, 3};
    const PoolShape pool{8, conv.out_height(), conv.out_width()};
    net.layers = {conv2d_layer(conv, p), pool2x2_layer(pool), dense_layer(pool.n_out(), 64, p),
                  dense_layer(64, n_out, p)};
    return net;
}

inline std::vector<std::string> preset_names() { return {"desk-mlp", "desk-cnn"}; }

inline NetworkTopology make_preset(const std::string& name, std::size_t n_in, std::size_t n_out, const NeuronParams& p,
                                   std::size_t timesteps) {
    if (name == "desk-mlp") return desk_mlp(n_in, n_out, p, timesteps);
    if (name == "desk-cnn") return desk_cnn(n_in, n_out, p, timesteps);
    throw ConfigError("unknown preset '" + name + "' (desk-mlp, desk-cnn)");
}

} // namespace edgesnn
