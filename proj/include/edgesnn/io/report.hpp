#pragma once

// Run reports (JSON), Markdown tables and SVG bar charts.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgesnn/energy.hpp"
#include "edgesnn/hardware_map.hpp"
#include "edgesnn/io/format.hpp"

namespace edgesnn::io {

struct RunReport {
    std::string label;
    std::string dataset;
    std::string network;
    std::string chip;
    std::string encoder;
    std::size_t timesteps = 0;
    bool adaptive = false;
    std::size_t n_samples = 0;
    double accuracy = 0.0;
    double low_confidence = 0.0; // fraction of samples with a silent output layer
    double spikes_per_inference = 0.0;
    double sops_per_inference = 0.0;
    double energy_per_inference_j = 0.0;
    EnergyReport energy; // summed over the test set
    UtilizationReport utilization;
    std::optional<StageTimings> timings; // only when timing capture is requested
};

inline nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["format"] = "edgesnn-run-report";
    j["version"] = 1;
    j["label"] = r.label;
    j["dataset"] = r.dataset;
    j["network"] = r.network;
    j["chip"] = r.chip;
    j["encoder"] = r.encoder;
    j["timesteps"] = r.timesteps;
    j["adaptive"] = r.adaptive;
    j["n_samples"] = r.n_samples;
    j["accuracy"] = r.accuracy;
    j["low_confidence"] = r.low_confidence;
    j["spikes_per_inference"] = r.spikes_per_inference;
    j["sops_per_inference"] = r.sops_per_inference;
    j["energy_per_inference_j"] = r.energy_per_inference_j;
    const auto& e = r.energy;
    j["energy"] = {{"n_sop", e.n_sop},
                   {"n_spikes", e.n_spikes},
                   {"n_inter_spikes", e.n_inter_spikes},
                   {"n_neuron_updates", e.n_neuron_updates},
                   {"e_total_j", e.e_total},
                   {"e_synaptic_ops_j", e.breakdown.synaptic_ops},
                   {"e_spike_comm_j", e.breakdown.spike_comm},
                   {"e_neuron_updates_j", e.breakdown.neuron_updates},
                   {"e_routing_j", e.breakdown.routing},
                   {"efficiency_formula", kEfficiencyFormula}};
    j["energy"]["gops_per_watt"] = e.gops_per_watt ? nlohmann::ordered_json(*e.gops_per_watt) : nullptr;
    j["utilization"] = {{"core_pct", r.utilization.core_pct},
                        {"memory_pct", r.utilization.memory_pct},
                        {"traffic_pct", r.utilization.traffic_pct}};
    if (r.timings)
        j["latency_s"] = {{"encode", r.timings->encode_s},
                          {"network", r.timings->network_s},
                          {"decode", r.timings->decode_s}};
    return j;
}

inline RunReport report_from_json(const std::string& text, const std::string& source) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", "") != "edgesnn-run-report") throw ParseError(source + ": not an edgesnn run report");
        RunReport r;
        r.label = j.at("label").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.network = j.value("network", "");
        r.chip = j.value("chip", "");
        r.encoder = j.at("encoder").get<std::string>();
        r.timesteps = j.at("timesteps").get<std::size_t>();
        r.adaptive = j.at("adaptive").get<bool>();
        r.n_samples = j.at("n_samples").get<std::size_t>();
        r.accuracy = j.at("accuracy").get<double>();
        r.low_confidence = j.value("low_confidence", 0.0);
        r.spikes_per_inference = j.at("spikes_per_inference").get<double>();
        r.sops_per_inference = j.at("sops_per_inference").get<double>();
        r.energy_per_inference_j = j.at("energy_per_inference_j").get<double>();
        const auto& e = j.at("energy");
        r.energy.n_sop = e.at("n_sop").get<std::uint64_t>();
        r.energy.n_spikes = e.at("n_spikes").get<std::uint64_t>();
        r.energy.n_inter_spikes = e.at("n_inter_spikes").get<std::uint64_t>();
        r.energy.n_neuron_updates = e.at("n_neuron_updates").get<std::uint64_t>();
        r.energy.e_total = e.at("e_total_j").get<double>();
        r.energy.breakdown = {e.at("e_synaptic_ops_j").get<double>(), e.at("e_spike_comm_j").get<double>(),
                              e.at("e_neuron_updates_j").get<double>(), e.at("e_routing_j").get<double>()};
        if (!e.at("gops_per_watt").is_null()) r.energy.gops_per_watt = e.at("gops_per_watt").get<double>();
        const auto& u = j.at("utilization");
        r.utilization.core_pct = u.at("core_pct").get<double>();
        r.utilization.memory_pct = u.at("memory_pct").get<double>();
        r.utilization.traffic_pct = u.at("traffic_pct").get<double>();
        if (j.contains("latency_s")) {
            const auto& l = j.at("latency_s");
            r.timings = StageTimings{l.at("encode").get<double>(), l.at("network").get<double>(),
                                     l.at("decode").get<double>()};
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": " + e.what());
    }
}

inline std::string report_to_text(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

/// Ablation-style table: one row per configuration, ratio columns from the second row on.
inline std::string summary_table(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    const bool ratios = reports.size() > 1;
    os << "| Configuration | Accuracy (%) | Spikes/Inf | SOPs/Inf | Energy/Inf (uJ) |";
    if (ratios) os << " Spike reduction | Energy factor |";
    os << "\n|---|---:|---:|---:|---:|";
    if (ratios) os << "---:|---:|";
    os << '\n';
    for (const auto& r : reports) {
        os << "| " << r.label << " | " << fixed(100.0 * r.accuracy, 1) << " | " << fixed(r.spikes_per_inference, 1)
           << " | " << fixed(r.sops_per_inference, 1) << " | " << fixed(r.energy_per_inference_j * 1e6, 4) << " |";
        if (ratios) {
            const auto& b = reports.front();
            os << ' ' << fmt_ratio(ratio(b.spikes_per_inference, r.spikes_per_inference)) << " | "
               << fmt_ratio(ratio(b.energy_per_inference_j, r.energy_per_inference_j)) << " |";
        }
        os << '\n';
    }
    return os.str();
}

inline std::string utilization_table(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    os << "| Configuration | Core utilization (%) | Synaptic memory (%) | Inter-core synapses (%) |\n"
          "|---|---:|---:|---:|\n";
    for (const auto& r : reports)
        os << "| " << r.label << " | " << fixed(r.utilization.core_pct, 2) << " | " << fixed(r.utilization.memory_pct, 2)
           << " | " << fixed(r.utilization.traffic_pct, 2) << " |\n";
    return os.str();
}

inline std::string energy_table(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    os << "| Configuration | Synaptic ops (uJ) | Spike comm (uJ) | Neuron updates (uJ) | Routing (uJ) | GOp/s/W |\n"
          "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& r : reports) {
        const double n = r.n_samples ? static_cast<double>(r.n_samples) : 1.0;
        const auto& b = r.energy.breakdown;
        os << "| " << r.label << " | " << fixed(b.synaptic_ops / n * 1e6, 4) << " | "
           << fixed(b.spike_comm / n * 1e6, 4) << " | " << fixed(b.neuron_updates / n * 1e6, 4) << " | "
           << fixed(b.routing / n * 1e6, 4) << " | "
           << (r.energy.gops_per_watt ? fixed(*r.energy.gops_per_watt, 1) : "undefined") << " |\n";
    }
    return os.str();
}

/// Grouped (or stacked) vertical bar chart as standalone SVG.
struct BarChart {
    std::string title;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<std::string> series;
    std::vector<std::vector<double>> values; // [category][series]
    bool stacked = false;
};

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string render_svg(const BarChart& c) {
    static constexpr const char* palette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"};
    const double W = 720, H = 420, left = 80, right = 170, top = 50, bottom = 90;
    const double pw = W - left - right, ph = H - top - bottom;
    double ymax = 0;
    for (const auto& row : c.values) {
        double s = 0;
        for (double v : row) {
            ymax = std::max(ymax, v);
            s += v;
        }
        if (c.stacked) ymax = std::max(ymax, s);
    }
    if (!(ymax > 0)) ymax = 1;
    // Round the axis up to 1, 2 or 5 times a power of ten.
    const double mag = std::pow(10.0, std::floor(std::log10(ymax)));
    double top_v = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0})
        if (f * mag >= ymax) {
            top_v = f * mag;
            break;
        }

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(c.title)
       << "</text>\n";
    for (int k = 0; k <= 5; ++k) {
        const double v = top_v * k / 5, y = top + ph - ph * k / 5;
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fixed(y, 1) << "\" y2=\"" << fixed(y, 1)
           << "\" stroke=\"#ddd\"/>\n<text x=\"" << left - 6 << "\" y=\"" << fixed(y + 4, 1)
           << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << xml_escape(c.y_label) << "</text>\n";
    const double slot = c.categories.empty() ? pw : pw / static_cast<double>(c.categories.size());
    const std::size_t ns = std::max<std::size_t>(1, c.series.size());
    for (std::size_t i = 0; i < c.categories.size(); ++i) {
        const double x0 = left + slot * static_cast<double>(i);
        double stack = 0;
        for (std::size_t s = 0; s < c.series.size(); ++s) {
            const double v = c.values[i][s];
            const double h = ph * v / top_v;
            double x, w, y;
            if (c.stacked) {
                w = slot * 0.6;
                x = x0 + slot * 0.2;
                y = top + ph - ph * (stack + v) / top_v;
                stack += v;
            } else {
                w = slot * 0.8 / static_cast<double>(ns);
                x = x0 + slot * 0.1 + w * static_cast<double>(s);
                y = top + ph - h;
            }
            os << "<rect x=\"" << fixed(x, 1) << "\" y=\"" << fixed(y, 1) << "\" width=\"" << fixed(w, 1)
               << "\" height=\"" << fixed(h, 1) << "\" fill=\"" << palette[s % 6] << "\"><title>"
               << xml_escape(c.series[s]) << ": " << fmt(v) << "</title></rect>\n";
        }
        os << "<text x=\"" << fixed(x0 + slot / 2, 1) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\">" << xml_escape(c.categories[i]) << "</text>\n";
    }
    os << "<line x1=\"" << left << "\" x2=\"" << left << "\" y1=\"" << top << "\" y2=\"" << top + ph
       << "\" stroke=\"black\"/>\n<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << top + ph
       << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
    for (std::size_t s = 0; s < c.series.size(); ++s) {
        const double y = top + 10 + 20 * static_cast<double>(s);
        os << "<rect x=\"" << left + pw + 16 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\"" << palette[s % 6]
           << "\"/>\n<text x=\"" << left + pw + 34 << "\" y=\"" << y + 10 << "\">" << xml_escape(c.series[s])
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline BarChart utilization_chart(const std::vector<RunReport>& rs) {
    BarChart c{"Hardware utilization", "percent", {}, {"cores", "synaptic memory", "inter-core synapses"}, {}, false};
    for (const auto& r : rs) {
        c.categories.push_back(r.label);
        c.values.push_back({r.utilization.core_pct, r.utilization.memory_pct, r.utilization.traffic_pct});
    }
    return c;
}

inline BarChart energy_chart(const std::vector<RunReport>& rs) {
    BarChart c{"Energy per inference", "microjoules", {}, {"synaptic ops", "spike comm", "neuron updates", "routing"},
               {}, true};
    for (const auto& r : rs) {
        const double n = r.n_samples ? static_cast<double>(r.n_samples) : 1.0;
        const auto& b = r.energy.breakdown;
        c.categories.push_back(r.label);
        c.values.push_back({b.synaptic_ops / n * 1e6, b.spike_comm / n * 1e6, b.neuron_updates / n * 1e6,
                            b.routing / n * 1e6});
    }
    return c;
}

inline BarChart spike_chart(const std::vector<RunReport>& rs) {
    BarChart c{"Spikes per inference", "spikes", {}, {"spikes"}, {}, false};
    for (const auto& r : rs) {
        c.categories.push_back(r.label);
        c.values.push_back({r.spikes_per_inference});
    }
    return c;
}

} // namespace edgesnn::io
