#pragma once

// Mapping files (`neuron core` per line) and chip description files
// (`chip.key = value` per line).

#include <sstream>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/hardware_map.hpp"
#include "edgesnn/io/format.hpp"

namespace edgesnn::io {

inline std::string mapping_to_text(const Mapping& m) {
    std::ostringstream os;
    os << "# edgesnn-mapping neurons=" << m.assignment.size() << '\n';
    for (std::size_t n = 0; n < m.assignment.size(); ++n) os << n << ' ' << m.assignment[n] << '\n';
    return os.str();
}

/// Parses a mapping and checks it against the graph and chip.
inline Mapping mapping_from_text(std::string_view text, const SynapseGraph& g, const ChipModel& chip,
                                 const std::string& source = "<mapping>") {
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t n = 0;
    std::vector<std::uint32_t> a(g.n_neurons, 0);
    std::vector<char> seen(g.n_neurons, 0);
    while (std::getline(is, line)) {
        ++n;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ls(t);
        std::string ns, cs, extra;
        ls >> ns >> cs;
        std::size_t neuron = 0;
        std::uint32_t core = 0;
        if (!parse_number(ns, neuron) || !parse_number(cs, core) || (ls >> extra))
            throw ParseError(source, n, "expected 'neuron core'");
        if (neuron >= g.n_neurons)
            throw ParseError(source, n, "neuron " + ns + " outside the network (" + std::to_string(g.n_neurons) + ")");
        if (core >= chip.n_cores)
            throw ParseError(source, n, "core " + cs + " outside the chip (" + std::to_string(chip.n_cores) + ")");
        if (seen[neuron]) throw ParseError(source, n, "neuron " + ns + " assigned twice");
        seen[neuron] = 1;
        a[neuron] = core;
    }
    for (std::size_t i = 0; i < g.n_neurons; ++i)
        if (!seen[i]) throw ParseError(source + ": neuron " + std::to_string(i) + " has no core");
    auto m = make_mapping(g, std::move(a));
    check_mapping(g, chip, m);
    return m;
}

inline std::string chip_to_text(const ChipModel& c) {
    std::ostringstream os;
    os << "chip.name = " << c.name << "\nchip.n_cores = " << c.n_cores << "\nchip.neurons_per_core = "
       << c.neurons_per_core << "\nchip.synapses_per_core = " << c.synapses_per_core << "\nchip.e_sop_pj = "
       << fmt(c.e_sop_pj) << "\nchip.e_spike_pj = " << fmt(c.e_spike_pj) << "\nchip.inter_core_cost = "
       << fmt(c.inter_core_cost) << "\nchip.e_neuron_pj = " << fmt(c.e_neuron_pj)
       << "\nchip.e_routing_pj = " << fmt(c.e_routing_pj) << '\n';
    return os.str();
}

/// Chip file; unspecified energy keys keep their defaults, capacities are required.
inline ChipModel chip_from_text(std::string_view text, const std::string& source = "<chip>") {
    ChipModel c;
    c.name = source;
    bool cores = false, neurons = false, synapses = false;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source, n, "expected 'key = value'");
        const auto key = trim(std::string_view(t).substr(0, eq));
        const auto value = trim(std::string_view(t).substr(eq + 1));
        bool ok = true;
        if (key == "chip.name") c.name = value;
        else if (key == "chip.n_cores") ok = cores = parse_number(value, c.n_cores);
        else if (key == "chip.neurons_per_core") ok = neurons = parse_number(value, c.neurons_per_core);
        else if (key == "chip.synapses_per_core") ok = synapses = parse_number(value, c.synapses_per_core);
        else if (key == "chip.e_sop_pj") ok = parse_number(value, c.e_sop_pj);
        else if (key == "chip.e_spike_pj") ok = parse_number(value, c.e_spike_pj);
        else if (key == "chip.inter_core_cost") ok = parse_number(value, c.inter_core_cost);
        else if (key == "chip.e_neuron_pj") ok = parse_number(value, c.e_neuron_pj);
        else if (key == "chip.e_routing_pj") ok = parse_number(value, c.e_routing_pj);
        else throw ParseError(source, n, "unknown key '" + key + "'");
        if (!ok) throw ParseError(source, n, "bad value '" + value + "' for " + key);
    }
    if (!cores || !neurons || !synapses)
        throw ParseError(source + ": chip.n_cores, chip.neurons_per_core and chip.synapses_per_core are required");
    try {
        c.validate();
    } catch (const ValueError& e) {
        throw ParseError(source + ": " + e.what());
    }
    return c;
}

/// A preset name or a chip file path.
inline ChipModel resolve_chip(const std::string& spec) {
    if (auto c = chip_preset(spec)) return *c;
    std::string names;
    for (const auto& p : chip_preset_names()) names += (names.empty() ? "" : ", ") + p;
    std::string text;
    try {
        text = read_file(spec);
    } catch (const ConfigError&) {
        throw ConfigError("chip '" + spec + "' is neither a preset (" + names + ") nor a readable file");
    }
    return chip_from_text(text, spec);
}

} // namespace edgesnn::io
