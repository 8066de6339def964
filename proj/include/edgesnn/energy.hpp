#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/hardware_map.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/simulator.hpp"

namespace edgesnn {

/// Wall-clock durations of the three inference stages, in seconds.
struct StageTimings {
    double encode_s = 0.0;
    double network_s = 0.0;
    double decode_s = 0.0;
    double total() const { return encode_s + network_s + decode_s; }
};

/// Energies in joules per component.
struct EnergyBreakdown {
    double synaptic_ops = 0.0;
    double spike_comm = 0.0;
    double neuron_updates = 0.0; // optional term, 0 unless the chip sets e_neuron_pj
    double routing = 0.0;        // optional term, 0 unless the chip sets e_routing_pj
};

struct EnergyReport {
    std::uint64_t n_sop = 0;
    std::uint64_t n_spikes = 0;       // every spike event, input spikes included
    std::uint64_t n_inter_spikes = 0; // spikes with at least one target on another core
    std::uint64_t n_neuron_updates = 0;
    double e_total = 0.0;
    EnergyBreakdown breakdown;
    std::optional<double> gops_per_watt; // 2 ops per SOP; undefined without energy
    StageTimings latency;
};

inline constexpr const char* kEfficiencyFormula = "GOp/s/W = 2 * n_sop / e_total / 1e9 (2 ops per SOP)";

namespace detail {

// For each neuron: does any of its outgoing synapses land on another core?
inline std::vector<char> crossing_sources(const SynapseGraph& g, const Mapping& m) {
    std::vector<char> cross(g.n_neurons, 0);
    for (auto [p, q] : g.synapses)
        if (m.assignment[p] != m.assignment[q]) cross[p] = 1;
    return cross;
}

} // namespace detail

/// Linear event-energy model: e_sop * n_sop + e_spike * (intra + inter_core_cost * inter)
/// plus the optional neuron-update and routing terms. Without a mapping every
/// spike is intra-core.
inline EnergyReport account(const SimState& sim, const ChipModel& chip, const SynapseGraph* graph,
                            const Mapping* mapping, const StageTimings& timings = {}) {
    chip.validate();
    if (timings.encode_s < 0 || timings.network_s < 0 || timings.decode_s < 0)
        throw ValueError("energy: stage durations must be nonnegative");
    if ((graph == nullptr) != (mapping == nullptr)) throw ValueError("energy: mapping needs its synapse graph");

    EnergyReport r;
    r.n_sop = sim.sop_count;
    r.n_spikes = sim.total_spikes();
    r.n_neuron_updates = sim.neuron_updates;
    if (mapping) {
        check_mapping(*graph, chip, *mapping);
        const auto counts = sim.flat_counts();
        if (counts.size() != graph->n_neurons) throw ShapeError("energy: simulation state does not match the mapping");
        const auto cross = detail::crossing_sources(*graph, *mapping);
        for (std::size_t n = 0; n < counts.size(); ++n)
            if (cross[n]) r.n_inter_spikes += counts[n];
    }
    const double intra = static_cast<double>(r.n_spikes - r.n_inter_spikes);
    const double inter = static_cast<double>(r.n_inter_spikes);
    r.breakdown.synaptic_ops = chip.e_sop_pj * static_cast<double>(r.n_sop) * 1e-12;
    r.breakdown.spike_comm = chip.e_spike_pj * (intra + chip.inter_core_cost * inter) * 1e-12;
    r.breakdown.neuron_updates = chip.e_neuron_pj * static_cast<double>(r.n_neuron_updates) * 1e-12;
    r.breakdown.routing = chip.e_routing_pj * inter * 1e-12;
    r.e_total = r.breakdown.synaptic_ops + r.breakdown.spike_comm + r.breakdown.neuron_updates + r.breakdown.routing;
    if (r.e_total > 0.0) r.gops_per_watt = 2.0 * static_cast<double>(r.n_sop) / r.e_total / 1e9;
    r.latency = timings;
    return r;
}

inline EnergyReport account(const SimState& sim, const ChipModel& chip, const StageTimings& timings = {}) {
    return account(sim, chip, nullptr, nullptr, timings);
}

/// Sums per-inference reports into one report for a whole test set.
inline EnergyReport accumulate(const std::vector<EnergyReport>& reports) {
    EnergyReport r;
    for (const auto& x : reports) {
        r.n_sop += x.n_sop;
        r.n_spikes += x.n_spikes;
        r.n_inter_spikes += x.n_inter_spikes;
        r.n_neuron_updates += x.n_neuron_updates;
        r.breakdown.synaptic_ops += x.breakdown.synaptic_ops;
        r.breakdown.spike_comm += x.breakdown.spike_comm;
        r.breakdown.neuron_updates += x.breakdown.neuron_updates;
        r.breakdown.routing += x.breakdown.routing;
        r.latency.encode_s += x.latency.encode_s;
        r.latency.network_s += x.latency.network_s;
        r.latency.decode_s += x.latency.decode_s;
    }
    r.e_total = r.breakdown.synaptic_ops + r.breakdown.spike_comm + r.breakdown.neuron_updates + r.breakdown.routing;
    if (r.e_total > 0.0) r.gops_per_watt = 2.0 * static_cast<double>(r.n_sop) / r.e_total / 1e9;
    return r;
}

struct ComparisonRow {
    std::string label;
    EnergyReport report;
    std::optional<double> spike_reduction; // first.n_spikes / this.n_spikes
    std::optional<double> energy_factor;   // first.e_total / this.e_total
};

inline std::optional<double> ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

/// Ratios of every report against the first one. A zero denominator leaves the
/// ratio undefined rather than infinite.
inline std::vector<ComparisonRow> compare(const std::vector<EnergyReport>& reports,
                                          const std::vector<std::string>& labels) {
    if (reports.empty()) throw ValueError("compare: no reports");
    if (labels.size() != reports.size()) throw ValueError("compare: one label per report required");
    std::vector<ComparisonRow> rows;
    const auto& base = reports.front();
    for (std::size_t i = 0; i < reports.size(); ++i)
        rows.push_back({labels[i], reports[i],
                        ratio(static_cast<double>(base.n_spikes), static_cast<double>(reports[i].n_spikes)),
                        ratio(base.e_total, reports[i].e_total)});
    return rows;
}

inline std::string fmt_ratio(const std::optional<double>& r) { return r ? io::fixed(*r, 1) + "x" : "undefined"; }

/// Markdown table; ratio columns appear only when there is something to compare.
inline void write_comparison_markdown(std::ostream& os, const std::vector<ComparisonRow>& rows) {
    const bool ratios = rows.size() > 1;
    os << "| Configuration | SOPs | Spikes | Energy (uJ) |";
    if (ratios) os << " Spike reduction | Energy factor |";
    os << "\n|---|---:|---:|---:|";
    if (ratios) os << "---:|---:|";
    os << '\n';
    for (const auto& r : rows) {
        os << "| " << r.label << " | " << r.report.n_sop << " | " << r.report.n_spikes << " | "
           << io::fixed(r.report.e_total * 1e6, 4) << " |";
        if (ratios) os << ' ' << fmt_ratio(r.spike_reduction) << " | " << fmt_ratio(r.energy_factor) << " |";
        os << '\n';
    }
}

/// CSV of the deterministic fields; wall-clock stage timings are left out.
inline void write_energy_csv(std::ostream& os, const EnergyReport& r) {
    os << "# " << kEfficiencyFormula << '\n';
    os << "n_sop,n_spikes,n_inter_spikes,n_neuron_updates,e_total_j,e_sop_j,e_spike_j,e_neuron_j,e_routing_j,gops_per_w\n";
    os << r.n_sop << ',' << r.n_spikes << ',' << r.n_inter_spikes << ',' << r.n_neuron_updates << ','
       << io::fmt(r.e_total) << ',' << io::fmt(r.breakdown.synaptic_ops) << ',' << io::fmt(r.breakdown.spike_comm)
       << ',' << io::fmt(r.breakdown.neuron_updates) << ',' << io::fmt(r.breakdown.routing) << ','
       << (r.gops_per_watt ? io::fmt(*r.gops_per_watt) : "undefined") << '\n';
}

} // namespace edgesnn
