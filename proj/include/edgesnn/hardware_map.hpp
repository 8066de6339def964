#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/network.hpp"
#include "edgesnn/rng.hpp"

namespace edgesnn {

/// Abstract multi-core neuromorphic processor. Energies are in picojoules.
struct ChipModel {
    std::string name = "custom";
    std::size_t n_cores = 1;
    std::size_t neurons_per_core = 1;
    std::size_t synapses_per_core = 1;
    double e_sop_pj = 2.0;
    double e_spike_pj = 20.0;
    double inter_core_cost = 2.0;
    double e_neuron_pj = 0.0;  // optional per neuron update
    double e_routing_pj = 0.0; // optional per cross-core spike event

    std::size_t neuron_capacity() const { return n_cores * neurons_per_core; }
    std::size_t synapse_capacity() const { return n_cores * synapses_per_core; }

    void validate() const {
        if (n_cores == 0 || neurons_per_core == 0 || synapses_per_core == 0)
            throw ValueError("chip '" + name + "': capacities must be positive");
        auto positive = [&](double v, const char* what) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ValueError("chip '" + name + "': " + what + " must be positive");
        };
        positive(e_sop_pj, "e_sop_pj");
        positive(e_spike_pj, "e_spike_pj");
        positive(inter_core_cost, "inter_core_cost");
        if (!(e_neuron_pj >= 0.0) || !(e_routing_pj >= 0.0))
            throw ValueError("chip '" + name + "': optional energy terms must be nonnegative");
    }
};

/// Built-in chip models: "loihi2-like" (128 cores, ~1M neurons, 120M synapses),
/// "truenorth-like" (4096 cores, ~1M neurons, 256M synapses) and "desk-16", a
/// 16-core chip sized for the desk-scale presets.
inline std::optional<ChipModel> chip_preset(std::string_view name) {
    ChipModel c;
    c.name = std::string(name);
    if (name == "loihi2-like") {
        c.n_cores = 128;
        c.neurons_per_core = 8192;
        c.synapses_per_core = 937500;
    } else if (name == "truenorth-like") {
        c.n_cores = 4096;
        c.neurons_per_core = 256;
        c.synapses_per_core = 62500;
    } else if (name == "desk-16") {
        c.n_cores = 16;
        c.neurons_per_core = 64;
        c.synapses_per_core = 4096;
    } else {
        return std::nullopt;
    }
    return c;
}

inline std::vector<std::string> chip_preset_names() { return {"loihi2-like", "truenorth-like", "desk-16"}; }

/// Directed synapse graph over globally numbered neurons, with an undirected
/// adjacency (with multiplicity, self-loops dropped) for cut computations.
struct SynapseGraph {
    std::size_t n_neurons = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> synapses; // (pre, post)
    std::vector<std::uint32_t> in_degree;
    std::vector<std::uint32_t> adj_offsets;
    std::vector<std::uint32_t> adj;

    std::size_t n_synapses() const { return synapses.size(); }
};

inline SynapseGraph make_graph(std::size_t n_neurons, std::vector<std::pair<std::uint32_t, std::uint32_t>> synapses) {
    SynapseGraph g;
    g.n_neurons = n_neurons;
    g.synapses = std::move(synapses);
    g.in_degree.assign(n_neurons, 0);
    std::vector<std::uint32_t> deg(n_neurons, 0);
    for (auto [a, b] : g.synapses) {
        if (a >= n_neurons || b >= n_neurons) throw ShapeError("synapse endpoint outside the neuron range");
        ++g.in_degree[b];
        if (a != b) {
            ++deg[a];
            ++deg[b];
        }
    }
    g.adj_offsets.assign(n_neurons + 1, 0);
    for (std::size_t i = 0; i < n_neurons; ++i) g.adj_offsets[i + 1] = g.adj_offsets[i] + deg[i];
    g.adj.resize(g.adj_offsets.back());
    std::vector<std::uint32_t> fill(g.adj_offsets.begin(), g.adj_offsets.end() - 1);
    for (auto [a, b] : g.synapses) {
        if (a == b) continue;
        g.adj[fill[a]++] = b;
        g.adj[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < n_neurons; ++i)
        std::sort(g.adj.begin() + g.adj_offsets[i], g.adj.begin() + g.adj_offsets[i + 1]);
    return g;
}

/// Structural synapses of a network. Neuron numbering follows
/// NetworkTopology::population_offsets (inputs first).
inline SynapseGraph synapse_graph(const NetworkTopology& net) {
    const auto off = net.population_offsets();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> syn;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const LayerSpec& l = net.layers[k];
        for (std::size_t j = 0; j < l.n_in; ++j)
            l.for_each_target(j, [&](std::size_t i) {
                syn.emplace_back(static_cast<std::uint32_t>(off[k] + j), static_cast<std::uint32_t>(off[k + 1] + i));
            });
    }
    return make_graph(off.back(), std::move(syn));
}

struct MappingStats {
    std::size_t n_cores_used = 0;
    std::size_t inter_core_synapses = 0;
    std::size_t total_synapses = 0;
    std::size_t synaptic_memory = 0; // each synapse charged once, to its postsynaptic core

    bool operator==(const MappingStats&) const = default;
};

struct Mapping {
    std::vector<std::uint32_t> assignment; // neuron -> core
    MappingStats stats;
};

inline MappingStats compute_stats(const SynapseGraph& g, const std::vector<std::uint32_t>& assignment) {
    if (assignment.size() != g.n_neurons)
        throw ShapeError("mapping assigns " + std::to_string(assignment.size()) + " neurons, graph has " +
                         std::to_string(g.n_neurons));
    MappingStats s;
    std::vector<char> used;
    for (auto c : assignment) {
        if (c >= used.size()) used.resize(c + 1, 0);
        used[c] = 1;
    }
    s.n_cores_used = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
    s.total_synapses = g.n_synapses();
    s.synaptic_memory = g.n_synapses();
    for (auto [a, b] : g.synapses) s.inter_core_synapses += assignment[a] != assignment[b] ? 1 : 0;
    return s;
}

inline Mapping make_mapping(const SynapseGraph& g, std::vector<std::uint32_t> assignment) {
    Mapping m;
    m.stats = compute_stats(g, assignment);
    m.assignment = std::move(assignment);
    return m;
}

/// Throws unless every neuron sits on an existing core and no core exceeds its
/// neuron or synapse capacity, and the cached stats match the assignment.
inline void check_mapping(const SynapseGraph& g, const ChipModel& chip, const Mapping& m) {
    if (m.assignment.size() != g.n_neurons)
        throw ValueError("mapping covers " + std::to_string(m.assignment.size()) + " neurons, network has " +
                         std::to_string(g.n_neurons));
    std::vector<std::size_t> n(chip.n_cores, 0), syn(chip.n_cores, 0);
    for (std::size_t i = 0; i < g.n_neurons; ++i) {
        const auto c = m.assignment[i];
        if (c >= chip.n_cores)
            throw ValueError("neuron " + std::to_string(i) + " assigned to core " + std::to_string(c) + " of a " +
                             std::to_string(chip.n_cores) + "-core chip");
        ++n[c];
        syn[c] += g.in_degree[i];
    }
    for (std::size_t c = 0; c < chip.n_cores; ++c) {
        if (n[c] > chip.neurons_per_core)
            throw CapacityError("core " + std::to_string(c) + " holds " + std::to_string(n[c]) + " neurons, capacity " +
                                std::to_string(chip.neurons_per_core));
        if (syn[c] > chip.synapses_per_core)
            throw CapacityError("core " + std::to_string(c) + " holds " + std::to_string(syn[c]) +
                                " synapses, capacity " + std::to_string(chip.synapses_per_core));
    }
    if (!(compute_stats(g, m.assignment) == m.stats)) throw ValueError("mapping statistics do not match its assignment");
}

/// Throws CapacityError naming the binding constraint when the chip cannot hold the graph.
inline void check_feasible(const SynapseGraph& g, const ChipModel& chip) {
    chip.validate();
    if (g.n_neurons > chip.neuron_capacity())
        throw CapacityError("network has " + std::to_string(g.n_neurons) + " neurons, chip holds " +
                            std::to_string(chip.neuron_capacity()) + " (binding constraint: neurons)");
    if (g.n_synapses() > chip.synapse_capacity())
        throw CapacityError("network has " + std::to_string(g.n_synapses()) + " synapses, chip holds " +
                            std::to_string(chip.synapse_capacity()) + " (binding constraint: synapses)");
    for (std::size_t i = 0; i < g.n_neurons; ++i)
        if (g.in_degree[i] > chip.synapses_per_core)
            throw CapacityError("neuron " + std::to_string(i) + " has fan-in " + std::to_string(g.in_degree[i]) +
                                " above the per-core synapse capacity (binding constraint: synapses per core)");
}

/// Weights of the hardware loss terms.
struct MapperConfig {
    double beta1 = 1.0; // cores used
    double beta2 = 1.0; // inter-core synapse fraction
    double beta3 = 1.0; // synaptic memory fraction
    std::size_t max_iters = 100000;
    std::uint64_t seed = 0;
    std::size_t kl_max_neurons = 256;   // Kernighan-Lin passes only up to this size
    std::size_t exact_max_neurons = 12; // branch-and-bound polish up to this size

    void validate() const {
        for (double b : {beta1, beta2, beta3})
            if (!(b >= 0.0) || !std::isfinite(b)) throw ValueError("mapper: loss weights must be finite and >= 0");
        if (beta1 == 0.0 && beta2 == 0.0 && beta3 == 0.0) throw ValueError("mapper: loss weights are all zero");
    }
};

/// beta1 * N_cores / N_total + beta2 * C_inter / C_total + beta3 * M_syn / M_max.
/// The traffic term is 0 for a graph without synapses.
inline double hw_loss(const MappingStats& s, const ChipModel& chip, const MapperConfig& cfg) {
    const double cores = static_cast<double>(s.n_cores_used) / static_cast<double>(chip.n_cores);
    const double traffic =
        s.total_synapses ? static_cast<double>(s.inter_core_synapses) / static_cast<double>(s.total_synapses) : 0.0;
    const double memory = static_cast<double>(s.synaptic_memory) / static_cast<double>(chip.synapse_capacity());
    return cfg.beta1 * cores + cfg.beta2 * traffic + cfg.beta3 * memory;
}

inline double hw_loss(const SynapseGraph& g, const Mapping& m, const ChipModel& chip, const MapperConfig& cfg) {
    check_mapping(g, chip, m);
    return hw_loss(m.stats, chip, cfg);
}

namespace detail {

struct CoreLoad {
    std::vector<std::size_t> neurons, synapses;
    explicit CoreLoad(std::size_t cores) : neurons(cores, 0), synapses(cores, 0) {}
    bool fits(const ChipModel& chip, std::size_t core, std::size_t in_degree) const {
        return neurons[core] + 1 <= chip.neurons_per_core && synapses[core] + in_degree <= chip.synapses_per_core;
    }
    void add(std::size_t core, std::size_t in_degree) {
        ++neurons[core];
        synapses[core] += in_degree;
    }
};

inline Mapping fill_in_order(const SynapseGraph& g, const ChipModel& chip, const std::vector<std::uint32_t>& order) {
    check_feasible(g, chip);
    std::vector<std::uint32_t> assignment(g.n_neurons, 0);
    CoreLoad load(chip.n_cores);
    std::size_t core = 0;
    for (auto n : order) {
        while (core < chip.n_cores && !load.fits(chip, core, g.in_degree[n])) ++core;
        if (core == chip.n_cores)
            throw CapacityError("sequential placement ran out of cores at neuron " + std::to_string(n) +
                                " (binding constraint: per-core packing)");
        load.add(core, g.in_degree[n]);
        assignment[n] = static_cast<std::uint32_t>(core);
    }
    return make_mapping(g, std::move(assignment));
}

} // namespace detail

/// Breadth-first order over the undirected synapse graph, restarting at the
/// lowest unvisited neuron for each component.
inline std::vector<std::uint32_t> bfs_order(const SynapseGraph& g) {
    std::vector<std::uint32_t> order;
    order.reserve(g.n_neurons);
    std::vector<char> seen(g.n_neurons, 0);
    std::deque<std::uint32_t> queue;
    for (std::uint32_t root = 0; root < g.n_neurons; ++root) {
        if (seen[root]) continue;
        seen[root] = 1;
        queue.push_back(root);
        while (!queue.empty()) {
            const auto n = queue.front();
            queue.pop_front();
            order.push_back(n);
            for (auto e = g.adj_offsets[n]; e < g.adj_offsets[n + 1]; ++e) {
                const auto m = g.adj[e];
                if (!seen[m]) {
                    seen[m] = 1;
                    queue.push_back(m);
                }
            }
        }
    }
    return order;
}

/// Places neurons in BFS order, opening the next core whenever a capacity binds.
inline Mapping map_greedy(const SynapseGraph& g, const ChipModel& chip) {
    return detail::fill_in_order(g, chip, bfs_order(g));
}

/// Naive placement in neuron-index order.
inline Mapping map_sequential(const SynapseGraph& g, const ChipModel& chip) {
    std::vector<std::uint32_t> order(g.n_neurons);
    std::iota(order.begin(), order.end(), 0u);
    return detail::fill_in_order(g, chip, order);
}

/// Uniformly random core per neuron among those with spare capacity (neurons
/// visited in random order). Retries from scratch when packing gets stuck.
inline Mapping random_mapping(const SynapseGraph& g, const ChipModel& chip, Rng& rng, int attempts = 100) {
    check_feasible(g, chip);
    std::vector<std::uint32_t> order(g.n_neurons);
    std::iota(order.begin(), order.end(), 0u);
    for (int a = 0; a < attempts; ++a) {
        rng.shuffle(order);
        std::vector<std::uint32_t> assignment(g.n_neurons, 0);
        detail::CoreLoad load(chip.n_cores);
        bool ok = true;
        std::vector<std::uint32_t> open;
        for (auto n : order) {
            open.clear();
            for (std::uint32_t c = 0; c < chip.n_cores; ++c)
                if (load.fits(chip, c, g.in_degree[n])) open.push_back(c);
            if (open.empty()) {
                ok = false;
                break;
            }
            const auto c = open[rng.index(open.size())];
            load.add(c, g.in_degree[n]);
            assignment[n] = c;
        }
        if (ok) return make_mapping(g, std::move(assignment));
    }
    throw CapacityError("could not draw a random valid mapping");
}

namespace detail {

/// Incremental local-search state over one assignment.
class LocalSearch {
public:
    LocalSearch(const SynapseGraph& g, const ChipModel& chip, const MapperConfig& cfg, std::vector<std::uint32_t> a)
        : g_(g), chip_(chip), core_(std::move(a)), load_(chip.n_cores) {
        for (std::size_t n = 0; n < g.n_neurons; ++n) load_.add(core_[n], g.in_degree[n]);
        for (std::size_t c = 0; c < chip.n_cores; ++c) used_ += load_.neurons[c] ? 1 : 0;
        for (auto [a2, b] : g.synapses) cut_ += core_[a2] != core_[b] ? 1 : 0;
        core_weight_ = cfg.beta1 / static_cast<double>(chip.n_cores);
        cut_weight_ = g.n_synapses() ? cfg.beta2 / static_cast<double>(g.n_synapses()) : 0.0;
        eps_ = 1e-12 * (cfg.beta1 + cfg.beta2 + cfg.beta3);
    }

    const std::vector<std::uint32_t>& assignment() const { return core_; }

    // Cut change if n moved to core b, ignoring edges to `skip`.
    long cut_delta(std::uint32_t n, std::uint32_t b, std::uint32_t skip) const {
        long d = 0;
        const auto a = core_[n];
        for (auto e = g_.adj_offsets[n]; e < g_.adj_offsets[n + 1]; ++e) {
            const auto m = g_.adj[e];
            if (m == skip) continue;
            d += (core_[m] != b) - (core_[m] != a);
        }
        return d;
    }

    bool try_move(std::uint32_t n, std::uint32_t b) {
        const auto a = core_[n];
        if (a == b || !load_.fits(chip_, b, g_.in_degree[n])) return false;
        const long dused = (load_.neurons[a] == 1 ? -1 : 0) + (load_.neurons[b] == 0 ? 1 : 0);
        const long dcut = cut_delta(n, b, static_cast<std::uint32_t>(g_.n_neurons));
        if (core_weight_ * static_cast<double>(dused) + cut_weight_ * static_cast<double>(dcut) >= -eps_) return false;
        apply_move(n, b, dused, dcut);
        return true;
    }

    bool try_swap(std::uint32_t n, std::uint32_t m) {
        const auto a = core_[n], b = core_[m];
        if (a == b) return false;
        const std::size_t dn = g_.in_degree[n], dm = g_.in_degree[m];
        if (load_.synapses[a] - dn + dm > chip_.synapses_per_core) return false;
        if (load_.synapses[b] - dm + dn > chip_.synapses_per_core) return false;
        const long dcut = cut_delta(n, b, m) + cut_delta(m, a, n);
        if (cut_weight_ * static_cast<double>(dcut) >= -eps_) return false;
        load_.synapses[a] += dm;
        load_.synapses[a] -= dn;
        load_.synapses[b] += dn;
        load_.synapses[b] -= dm;
        core_[n] = b;
        core_[m] = a;
        cut_ += dcut;
        return true;
    }

    // Moves every neuron of core a onto core b.
    bool try_merge(std::uint32_t a, std::uint32_t b) {
        if (a == b || load_.neurons[a] == 0 || load_.neurons[b] == 0) return false;
        if (load_.neurons[a] + load_.neurons[b] > chip_.neurons_per_core) return false;
        if (load_.synapses[a] + load_.synapses[b] > chip_.synapses_per_core) return false;
        long new_cut = 0;
        for (auto [p, q] : g_.synapses) {
            const auto cp = core_[p] == a ? b : core_[p];
            const auto cq = core_[q] == a ? b : core_[q];
            new_cut += cp != cq;
        }
        const long dcut = new_cut - cut_;
        if (-core_weight_ + cut_weight_ * static_cast<double>(dcut) >= -eps_) return false;
        for (auto& c : core_)
            if (c == a) c = b;
        load_.neurons[b] += load_.neurons[a];
        load_.synapses[b] += load_.synapses[a];
        load_.neurons[a] = load_.synapses[a] = 0;
        --used_;
        cut_ = new_cut;
        return true;
    }

    std::optional<std::uint32_t> first_empty_core() const {
        for (std::uint32_t c = 0; c < chip_.n_cores; ++c)
            if (load_.neurons[c] == 0) return c;
        return std::nullopt;
    }

    bool is_used(std::uint32_t c) const { return load_.neurons[c] != 0; }

    /// Loss change of moving n to b, or nullopt if b cannot take it.
    std::optional<double> move_delta(std::uint32_t n, std::uint32_t b) const {
        const auto a = core_[n];
        if (a == b || !load_.fits(chip_, b, g_.in_degree[n])) return std::nullopt;
        const long dused = (load_.neurons[a] == 1 ? -1 : 0) + (load_.neurons[b] == 0 ? 1 : 0);
        const long dcut = cut_delta(n, b, static_cast<std::uint32_t>(g_.n_neurons));
        return core_weight_ * static_cast<double>(dused) + cut_weight_ * static_cast<double>(dcut);
    }

    void force_move(std::uint32_t n, std::uint32_t b) {
        const auto a = core_[n];
        const long dused = (load_.neurons[a] == 1 ? -1 : 0) + (load_.neurons[b] == 0 ? 1 : 0);
        apply_move(n, b, dused, cut_delta(n, b, static_cast<std::uint32_t>(g_.n_neurons)));
    }

    double eps() const { return eps_; }

private:
    void apply_move(std::uint32_t n, std::uint32_t b, long dused, long dcut) {
        const auto a = core_[n];
        --load_.neurons[a];
        load_.synapses[a] -= g_.in_degree[n];
        load_.add(b, g_.in_degree[n]);
        core_[n] = b;
        used_ = static_cast<std::size_t>(static_cast<long>(used_) + dused);
        cut_ += dcut;
    }

    const SynapseGraph& g_;
    const ChipModel& chip_;
    std::vector<std::uint32_t> core_;
    CoreLoad load_;
    std::size_t used_ = 0;
    long cut_ = 0;
    double core_weight_ = 0.0, cut_weight_ = 0.0, eps_ = 0.0;
};

} // namespace detail

namespace detail {

// One Kernighan-Lin pass over single-neuron moves: repeatedly applies the best
// move among unlocked neurons (uphill allowed), locks the moved neuron, then
// rolls back to the best prefix. Returns true if the pass improved the loss.
inline bool kl_pass(LocalSearch& ls, const std::vector<std::uint32_t>& order, std::size_t n_cores) {
    std::vector<char> locked(order.size() + 1, 0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> undo; // (neuron, previous core)
    double running = 0.0, best = 0.0;
    std::size_t best_len = 0;
    for (std::size_t step = 0; step < order.size(); ++step) {
        std::optional<double> best_delta;
        std::uint32_t best_n = 0, best_b = 0;
        const auto empty = ls.first_empty_core();
        for (auto n : order) {
            if (locked[n]) continue;
            for (std::uint32_t b = 0; b < n_cores; ++b) {
                if (!ls.is_used(b) && b != empty) continue;
                const auto d = ls.move_delta(n, b);
                if (d && (!best_delta || *d < *best_delta - ls.eps())) {
                    best_delta = d;
                    best_n = n;
                    best_b = b;
                }
            }
        }
        if (!best_delta) break;
        undo.emplace_back(best_n, ls.assignment()[best_n]);
        ls.force_move(best_n, best_b);
        locked[best_n] = 1;
        running += *best_delta;
        if (running < best - ls.eps()) {
            best = running;
            best_len = undo.size();
        }
    }
    while (undo.size() > best_len) {
        ls.force_move(undo.back().first, undo.back().second);
        undo.pop_back();
    }
    return best_len > 0;
}

// Depth-first branch and bound over assignments in BFS order. Cores are
// opened in index order only (labels are interchangeable), and the bound is the
// loss of the partial assignment, which can only grow.
class ExactSearch {
public:
    ExactSearch(const SynapseGraph& g, const ChipModel& chip, const MapperConfig& cfg)
        : g_(g), chip_(chip), order_(bfs_order(g)), pos_(g.n_neurons), load_(chip.n_cores) {
        for (std::size_t i = 0; i < order_.size(); ++i) pos_[order_[i]] = i;
        core_weight_ = cfg.beta1 / static_cast<double>(chip.n_cores);
        cut_weight_ = g.n_synapses() ? cfg.beta2 / static_cast<double>(g.n_synapses()) : 0.0;
        eps_ = 1e-12 * (cfg.beta1 + cfg.beta2 + cfg.beta3);
        assign_.assign(g.n_neurons, 0);
    }

    /// Best assignment strictly better than `bound` (in the cores + traffic part of the loss).
    std::optional<std::vector<std::uint32_t>> solve(double bound) {
        best_ = bound;
        found_.reset();
        recurse(0, 0, 0);
        return found_;
    }

    double partial_loss(const std::vector<std::uint32_t>& a) const {
        std::vector<char> used(chip_.n_cores, 0);
        for (auto c : a) used[c] = 1;
        long cut = 0;
        for (auto [p, q] : g_.synapses) cut += a[p] != a[q];
        return core_weight_ * static_cast<double>(std::count(used.begin(), used.end(), 1)) +
               cut_weight_ * static_cast<double>(cut);
    }

private:
    void recurse(std::size_t depth, std::size_t used, long cut) {
        const double bound = core_weight_ * static_cast<double>(used) + cut_weight_ * static_cast<double>(cut);
        if (bound >= best_ - eps_) return;
        if (depth == order_.size()) {
            best_ = bound;
            found_ = assign_;
            return;
        }
        const auto n = order_[depth];
        const std::size_t limit = std::min(used + 1, chip_.n_cores);
        for (std::size_t c = 0; c < limit; ++c) {
            if (!load_.fits(chip_, c, g_.in_degree[n])) continue;
            long dcut = 0;
            for (auto e = g_.adj_offsets[n]; e < g_.adj_offsets[n + 1]; ++e) {
                const auto m = g_.adj[e];
                if (pos_[m] < depth) dcut += assign_[m] != c;
            }
            assign_[n] = static_cast<std::uint32_t>(c);
            load_.add(c, g_.in_degree[n]);
            recurse(depth + 1, c == used ? used + 1 : used, cut + dcut);
            --load_.neurons[c];
            load_.synapses[c] -= g_.in_degree[n];
        }
    }

    const SynapseGraph& g_;
    const ChipModel& chip_;
    std::vector<std::uint32_t> order_;
    std::vector<std::size_t> pos_;
    CoreLoad load_;
    std::vector<std::uint32_t> assign_;
    std::optional<std::vector<std::uint32_t>> found_;
    double best_ = 0.0, core_weight_ = 0.0, cut_weight_ = 0.0, eps_ = 0.0;
};

} // namespace detail

/// Exact minimum-loss mapping by branch and bound; nullopt if no valid mapping exists.
inline std::optional<Mapping> map_exact(const SynapseGraph& g, const ChipModel& chip, const MapperConfig& cfg) {
    cfg.validate();
    chip.validate();
    detail::ExactSearch search(g, chip, cfg);
    auto a = search.solve(std::numeric_limits<double>::infinity());
    if (!a) return std::nullopt;
    return make_mapping(g, std::move(*a));
}

/// Improves `init` by local search over single-neuron moves, pairwise swaps and
/// core merges (first strictly improving move in a seeded scan order), with
/// Kernighan-Lin passes to escape local minima. Graphs of at most
/// `exact_max_neurons` neurons are finished by branch and bound. Stops at a
/// local minimum or after `max_iters` accepted moves, and never returns a
/// higher hw_loss than `init`.
inline Mapping map_optimize(const SynapseGraph& g, const ChipModel& chip, const MapperConfig& cfg, const Mapping& init) {
    cfg.validate();
    chip.validate();
    check_mapping(g, chip, init);

    std::vector<std::uint32_t> order(g.n_neurons);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(cfg.seed);
    rng.shuffle(order);

    detail::LocalSearch ls(g, chip, cfg, init.assignment);
    const auto n_cores = static_cast<std::uint32_t>(chip.n_cores);
    std::size_t iters = 0;
    bool improved = true;
    while (improved && iters < cfg.max_iters) {
        improved = false;
        for (auto n : order) {
            const auto empty = ls.first_empty_core();
            for (std::uint32_t b = 0; b < n_cores && iters < cfg.max_iters; ++b) {
                if (!ls.is_used(b) && b != empty) continue; // empty cores are interchangeable
                if (ls.try_move(n, b)) {
                    ++iters;
                    improved = true;
                    break;
                }
            }
        }
        for (std::size_t x = 0; x < order.size() && iters < cfg.max_iters; ++x)
            for (std::size_t y = x + 1; y < order.size() && iters < cfg.max_iters; ++y)
                if (ls.try_swap(order[x], order[y])) {
                    ++iters;
                    improved = true;
                }
        for (std::uint32_t a = 0; a < n_cores && iters < cfg.max_iters; ++a)
            for (std::uint32_t b = 0; b < n_cores && iters < cfg.max_iters; ++b)
                if (ls.try_merge(a, b)) {
                    ++iters;
                    improved = true;
                }
        if (!improved && g.n_neurons <= cfg.kl_max_neurons && iters < cfg.max_iters && detail::kl_pass(ls, order, n_cores)) {
            ++iters;
            improved = true;
        }
    }

    auto assignment = ls.assignment();
    if (g.n_neurons <= cfg.exact_max_neurons) {
        detail::ExactSearch exact(g, chip, cfg);
        if (auto better = exact.solve(exact.partial_loss(assignment))) assignment = std::move(*better);
    }
    return make_mapping(g, std::move(assignment));
}

struct UtilizationReport {
    double core_pct = 0.0;    // cores used / cores on chip
    double memory_pct = 0.0;  // synaptic memory used / chip synaptic memory
    double traffic_pct = 0.0; // inter-core synapses / all synapses
    MappingStats stats;
    bool degenerate = false;  // empty network
};

inline UtilizationReport utilization_report(const MappingStats& s, const ChipModel& chip) {
    UtilizationReport r;
    r.stats = s;
    if (s.n_cores_used == 0 && s.total_synapses == 0) {
        r.degenerate = true;
        return r;
    }
    r.core_pct = 100.0 * static_cast<double>(s.n_cores_used) / static_cast<double>(chip.n_cores);
    r.memory_pct = 100.0 * static_cast<double>(s.synaptic_memory) / static_cast<double>(chip.synapse_capacity());
    r.traffic_pct =
        s.total_synapses ? 100.0 * static_cast<double>(s.inter_core_synapses) / static_cast<double>(s.total_synapses) : 0.0;
    return r;
}

inline UtilizationReport utilization_report(const Mapping& m, const ChipModel& chip) {
    return utilization_report(m.stats, chip);
}

} // namespace edgesnn
