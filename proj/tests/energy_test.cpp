#include <sstream>

#include <gtest/gtest.h>

#include "edgesnn/energy.hpp"
#include "reference_sim.hpp"

namespace edgesnn {
namespace {

ChipModel chip(std::size_t cores = 4) {
    ChipModel c;
    c.n_cores = cores;
    c.neurons_per_core = 64;
    c.synapses_per_core = 4096;
    return c;
}

SimState state_with(std::uint64_t sops, std::vector<std::vector<std::uint64_t>> counts, std::uint64_t updates = 0) {
    SimState s;
    s.sop_count = sops;
    s.spike_counts = std::move(counts);
    s.neuron_updates = updates;
    return s;
}

TEST(Account, NoEventsNoEnergy) {
    const auto r = account(state_with(0, {{0, 0}}), chip());
    EXPECT_EQ(r.e_total, 0.0);
    EXPECT_FALSE(r.gops_per_watt.has_value());
}

TEST(Account, FourMicrojouleExample) {
    auto c = chip();
    c.e_sop_pj = 2.0;
    c.e_spike_pj = 20.0;
    const auto r = account(state_with(1'000'000, {{100'000}}), c);
    EXPECT_DOUBLE_EQ(r.breakdown.synaptic_ops, 2e-6);
    EXPECT_DOUBLE_EQ(r.breakdown.spike_comm, 2e-6);
    EXPECT_DOUBLE_EQ(r.e_total, 4e-6);
    EXPECT_DOUBLE_EQ(*r.gops_per_watt, 2.0 * 1e6 / 4e-6 / 1e9);
}

TEST(Account, PureFunctionOfInputs) {
    const auto s = state_with(1234, {{3, 4}, {5}}, 77);
    const auto a = account(s, chip(), {0.1, 0.2, 0.3});
    const auto b = account(s, chip(), {0.1, 0.2, 0.3});
    EXPECT_EQ(a.e_total, b.e_total);
    EXPECT_EQ(a.n_spikes, b.n_spikes);
    EXPECT_EQ(a.latency.total(), b.latency.total());
}

TEST(Account, RejectsNegativeDurationsAndBadChips) {
    EXPECT_THROW(account(state_with(1, {{1}}), chip(), {-1, 0, 0}), ValueError);
    auto c = chip();
    c.e_sop_pj = 0;
    EXPECT_THROW(account(state_with(1, {{1}}), c), ValueError);
}

// Every report satisfies the linear model when recomputed term by term.
TEST(Account, IdentityOnFuzzedStates) {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        auto c = chip();
        c.e_sop_pj = rng.uniform(1, 5);
        c.e_spike_pj = rng.uniform(10, 50);
        std::vector<std::vector<std::uint64_t>> counts(1 + rng.index(3));
        for (auto& pop : counts) pop.assign(1 + rng.index(6), 0), [&] { for (auto& x : pop) x = rng.index(1000); }();
        const auto s = state_with(rng.index(1u << 30), counts);
        const auto r = account(s, c);
        double spikes = 0;
        for (const auto& pop : counts)
            for (auto x : pop) spikes += static_cast<double>(x);
        EXPECT_EQ(r.n_spikes, static_cast<std::uint64_t>(spikes));
        EXPECT_EQ(r.e_total, c.e_sop_pj * static_cast<double>(s.sop_count) * 1e-12 + c.e_spike_pj * spikes * 1e-12);
    }
}

TEST(Account, CrossCoreSpikesChargedExtra) {
    NetworkTopology net;
    net.n_timesteps = 1;
    net.layers = {dense_layer(2, 2), dense_layer(2, 1)};
    const auto g = synapse_graph(net);
    // Neurons: inputs 0,1; hidden 2,3; output 4. Only hidden neuron 3 sits apart.
    const auto m = make_mapping(g, {0, 0, 0, 1, 0});
    auto c = chip();
    c.inter_core_cost = 3.0;
    c.e_routing_pj = 1.5;
    const auto s = state_with(10, {{1, 2}, {4, 5}, {6}});
    const auto r = account(s, c, &g, &m);
    // Inputs feed neuron 3 (cross), neuron 3 feeds 4 (cross), neuron 2 feeds 4 (local).
    EXPECT_EQ(r.n_inter_spikes, 1u + 2u + 5u);
    const double intra = 4 + 6, inter = 8;
    EXPECT_EQ(r.breakdown.spike_comm, 20.0 * (intra + 3.0 * inter) * 1e-12);
    EXPECT_EQ(r.breakdown.routing, 1.5 * inter * 1e-12);
    EXPECT_EQ(r.e_total, r.breakdown.synaptic_ops + r.breakdown.spike_comm + r.breakdown.neuron_updates +
                             r.breakdown.routing);
    const auto local = account(s, c);
    EXPECT_EQ(local.n_inter_spikes, 0u);
    EXPECT_LT(local.e_total, r.e_total);
}

TEST(Account, MonotoneInEventCounts) {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint64_t sop = rng.index(100000), sp = rng.index(100000);
        const auto a = account(state_with(sop, {{sp}}), chip());
        EXPECT_LE(a.e_total, account(state_with(sop + 1 + rng.index(10), {{sp}}), chip()).e_total);
        EXPECT_LE(a.e_total, account(state_with(sop, {{sp + 1 + rng.index(10)}}), chip()).e_total);
    }
}

TEST(Compare, IdenticalReportsGiveUnitRatios) {
    const auto r = account(state_with(500, {{40}}), chip());
    const auto rows = compare({r, r}, {"a", "b"});
    EXPECT_EQ(*rows[1].spike_reduction, 1.0);
    EXPECT_EQ(*rows[1].energy_factor, 1.0);
}

TEST(Compare, BaselineAgainstPipelineSpikeCounts) {
    EnergyReport base, full;
    base.n_spikes = 4'800'000;
    full.n_spikes = 1'020'000;
    const auto rows = compare({base, full}, {"Baseline (rate coding)", "Full pipeline"});
    EXPECT_EQ(fmt_ratio(rows[1].spike_reduction), "4.7x");
    EXPECT_FALSE(rows[1].energy_factor.has_value()); // both energies are zero
}

TEST(Compare, ZeroDenominatorIsUndefined) {
    const auto a = account(state_with(10, {{3}}), chip());
    const auto z = account(state_with(0, {{0}}), chip());
    const auto rows = compare({a, z}, {"a", "z"});
    EXPECT_FALSE(rows[1].spike_reduction.has_value());
    std::ostringstream os;
    write_comparison_markdown(os, rows);
    EXPECT_NE(os.str().find("undefined"), std::string::npos);
    EXPECT_EQ(os.str().find("inf"), std::string::npos);
}

TEST(Compare, EmptyListIsAnError) { EXPECT_THROW(compare({}, {}), ValueError); }

TEST(Compare, SingleReportHasNoRatioColumns) {
    std::ostringstream os;
    write_comparison_markdown(os, compare({account(state_with(1, {{1}}), chip())}, {"only"}));
    EXPECT_EQ(os.str().find("reduction"), std::string::npos);
}

TEST(Accumulate, SumsComponents) {
    const auto a = account(state_with(100, {{10}}), chip());
    const auto b = account(state_with(300, {{5}}), chip());
    const auto s = accumulate({a, b});
    EXPECT_EQ(s.n_sop, 400u);
    EXPECT_EQ(s.n_spikes, 15u);
    EXPECT_EQ(s.e_total, s.breakdown.synaptic_ops + s.breakdown.spike_comm + s.breakdown.neuron_updates +
                             s.breakdown.routing);
}

TEST(EnergyCsv, StatesFormulaAndOmitsTimings) {
    std::ostringstream os;
    write_energy_csv(os, account(state_with(0, {{0}}), chip(), {1, 2, 3}));
    EXPECT_NE(os.str().find("2 ops per SOP"), std::string::npos);
    EXPECT_NE(os.str().find("undefined"), std::string::npos);
    EXPECT_EQ(os.str().find("encode"), std::string::npos);
}

} // namespace
} // namespace edgesnn
