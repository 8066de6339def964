#pragma once

// Versioned text network format:
//
//   [meta]            version, timesteps, layers
//   [layer k]         kind, sizes, neuron parameters, geometry
//   [weights k]       one row per output neuron (dense) or per (out, in) channel pair (conv)
//
// Numbers are written in shortest round-trip form, so save(load(save(n))) is
// byte-identical to save(n).

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/network.hpp"

namespace edgesnn::io {

inline constexpr int kNetworkFormatVersion = 1;

inline std::string save_network(const NetworkTopology& net) {
    validate(net);
    std::ostringstream os;
    os << "# edgesnn network\n[meta]\nversion = " << kNetworkFormatVersion << "\ntimesteps = " << net.n_timesteps
       << "\nlayers = " << net.layers.size() << '\n';
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        os << "\n[layer " << k << "]\nkind = " << to_string(l.kind) << "\nn_in = " << l.n_in << "\nn_out = " << l.n_out
           << '\n';
        if (l.is_lif())
            os << "beta = " << fmt(l.params.beta) << "\nv_th = " << fmt(l.params.v_th)
               << "\nv_reset = " << fmt(l.params.v_reset) << "\nreset = " << to_string(l.params.reset) << '\n';
        if (l.kind == LayerKind::conv2d)
            os << "in_channels = " << l.conv.in_channels << "\nin_height = " << l.conv.in_height
               << "\nin_width = " << l.conv.in_width << "\nout_channels = " << l.conv.out_channels
               << "\nkernel = " << l.conv.kernel << '\n';
        if (l.kind == LayerKind::pool2x2)
            os << "channels = " << l.pool.channels << "\nin_height = " << l.pool.in_height
               << "\nin_width = " << l.pool.in_width << '\n';
        if (!l.has_weights()) continue;
        os << "\n[weights " << k << "]\n";
        const auto& w = l.kind == LayerKind::dense ? l.weights : l.kernel;
        const std::size_t row = l.kind == LayerKind::dense ? l.n_in : l.conv.kernel * l.conv.kernel;
        for (std::size_t i = 0; i < w.size(); ++i) os << fmt(w[i]) << ((i + 1) % row == 0 ? '\n' : ' ');
    }
    return os.str();
}

namespace detail {

struct Section {
    std::string name;
    std::size_t line = 0;
    std::map<std::string, std::pair<std::string, std::size_t>> keys;
    std::vector<std::pair<std::string, std::size_t>> rows;
};

class SectionReader {
public:
    SectionReader(const Section& s, const std::string& source) : s_(s), src_(source) {}

    template <class T>
    T number(const std::string& key) const {
        const auto it = s_.keys.find(key);
        if (it == s_.keys.end()) throw ParseError(src_, s_.line, "section [" + s_.name + "] is missing '" + key + "'");
        T v{};
        if (!parse_number(it->second.first, v))
            throw ParseError(src_, it->second.second, "section [" + s_.name + "]: bad number for '" + key + "'");
        return v;
    }

    std::string text(const std::string& key) const {
        const auto it = s_.keys.find(key);
        if (it == s_.keys.end()) throw ParseError(src_, s_.line, "section [" + s_.name + "] is missing '" + key + "'");
        return it->second.first;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(src_, s_.line, "section [" + s_.name + "]: " + what);
    }

private:
    const Section& s_;
    const std::string& src_;
};

} // namespace detail

inline NetworkTopology load_network(std::string_view text, const std::string& source = "<network>") {
    std::vector<detail::Section> sections;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ParseError(source, n, "unterminated section header");
            sections.push_back({t.substr(1, t.size() - 2), n, {}, {}});
            continue;
        }
        if (sections.empty()) throw ParseError(source, n, "content before the first section");
        auto& s = sections.back();
        if (s.name.rfind("weights", 0) == 0) {
            s.rows.emplace_back(t, n);
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source, n, "section [" + s.name + "]: expected 'key = value'");
        const auto key = trim(std::string_view(t).substr(0, eq));
        if (!s.keys.emplace(key, std::pair{trim(std::string_view(t).substr(eq + 1)), n}).second)
            throw ParseError(source, n, "section [" + s.name + "]: duplicate key '" + key + "'");
    }

    std::map<std::string, const detail::Section*> by_name;
    for (const auto& s : sections)
        if (!by_name.emplace(s.name, &s).second) throw ParseError(source, s.line, "duplicate section [" + s.name + "]");
    auto find = [&](const std::string& name) -> const detail::Section& {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw ParseError(source, n, "missing section [" + name + "]");
        return *it->second;
    };

    const detail::SectionReader meta(find("meta"), source);
    if (meta.number<int>("version") != kNetworkFormatVersion)
        meta.fail("unsupported version " + meta.text("version"));
    NetworkTopology net;
    net.n_timesteps = meta.number<std::size_t>("timesteps");
    const auto n_layers = meta.number<std::size_t>("layers");
    if (n_layers == 0) meta.fail("network has no layers");
    for (const auto& s : sections)
        if (s.name != "meta" && s.name.rfind("layer ", 0) != 0 && s.name.rfind("weights ", 0) != 0)
            throw ParseError(source, s.line, "unknown section [" + s.name + "]");

    for (std::size_t k = 0; k < n_layers; ++k) {
        const auto& sec = find("layer " + std::to_string(k));
        const detail::SectionReader r(sec, source);
        const auto kind = r.text("kind");
        const auto n_in = r.number<std::size_t>("n_in"), n_out = r.number<std::size_t>("n_out");
        NeuronParams p;
        if (kind != "pool2x2") {
            p.beta = r.number<double>("beta");
            p.v_th = r.number<double>("v_th");
            p.v_reset = r.number<double>("v_reset");
            const auto reset = r.text("reset");
            if (reset == "subtract") p.reset = ResetMode::subtract;
            else if (reset == "hard") p.reset = ResetMode::hard;
            else r.fail("reset must be subtract or hard");
            try {
                p.validate("layer " + std::to_string(k));
            } catch (const ValueError& e) {
                r.fail(e.what());
            }
        }
        LayerSpec l;
        try {
            if (kind == "dense") {
                l = dense_layer(n_in, n_out, p);
            } else if (kind == "conv2d") {
                l = conv2d_layer({r.number<std::size_t>("in_channels"), r.number<std::size_t>("in_height"),
                                  r.number<std::size_t>("in_width"), r.number<std::size_t>("out_channels"),
                                  r.number<std::size_t>("kernel")},
                                 p);
            } else if (kind == "pool2x2") {
                l = pool2x2_layer({r.number<std::size_t>("channels"), r.number<std::size_t>("in_height"),
                                   r.number<std::size_t>("in_width")});
            } else {
                r.fail("unknown layer kind '" + kind + "'");
            }
        } catch (const ShapeError& e) {
            r.fail(e.what());
        }
        if (l.n_in != n_in || l.n_out != n_out) r.fail("n_in/n_out disagree with the layer geometry");

        if (l.has_weights()) {
            const auto& ws = find("weights " + std::to_string(k));
            const detail::SectionReader wr(ws, source);
            auto& dst = kind == "dense" ? l.weights : l.kernel;
            std::size_t i = 0;
            for (const auto& [row, line_no] : ws.rows) {
                std::istringstream rs(row);
                std::string tok;
                while (rs >> tok) {
                    if (i >= dst.size())
                        throw ParseError(source, line_no, "section [" + ws.name + "]: more than " +
                                                              std::to_string(dst.size()) + " weights");
                    if (!parse_number(tok, dst[i]) || !std::isfinite(dst[i]))
                        throw ParseError(source, line_no, "section [" + ws.name + "]: bad weight '" + tok + "'");
                    ++i;
                }
            }
            if (i != dst.size())
                wr.fail("expected " + std::to_string(dst.size()) + " weights, found " + std::to_string(i));
            lower_conv(l);
        } else if (by_name.count("weights " + std::to_string(k))) {
            throw ParseError(source, by_name["weights " + std::to_string(k)]->line, "pool layers carry no weights");
        }
        net.layers.push_back(std::move(l));
    }
    if (by_name.count("layer " + std::to_string(n_layers)))
        throw ParseError(source, by_name["layer " + std::to_string(n_layers)]->line,
                         "more layer sections than meta.layers");
    try {
        validate(net);
    } catch (const Error& e) {
        throw ParseError(source + ": " + e.what());
    }
    return net;
}

inline NetworkTopology load_network_file(const std::string& path) { return load_network(read_file(path), path); }

inline void save_network_file(const std::string& path, const NetworkTopology& net) {
    write_atomic(path, save_network(net));
}

} // namespace edgesnn::io
