#pragma once

// Command implementations behind the CLI: train, map, run, report, ablate and
// dataset generation. Every artifact is a deterministic function of the
// configuration; wall-clock timings go to the log unless explicitly recorded.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "edgesnn/encoding.hpp"
#include "edgesnn/energy.hpp"
#include "edgesnn/hardware_map.hpp"
#include "edgesnn/io/config.hpp"
#include "edgesnn/io/dataset.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/io/hardware_files.hpp"
#include "edgesnn/io/network_file.hpp"
#include "edgesnn/io/report.hpp"
#include "edgesnn/presets.hpp"
#include "edgesnn/runtime_adapt.hpp"
#include "edgesnn/simulator.hpp"
#include "edgesnn/training.hpp"

namespace edgesnn::workflows {

namespace fs = std::filesystem;
using io::RunConfig;

struct Seeds {
    std::uint64_t init, encoder, encoder_test, train, mapper, baseline;
};

inline Seeds derive_seeds(std::uint64_t global) {
    return {derive_seed(global, "init"),  derive_seed(global, "encoder"), derive_seed(global, "encoder-test"),
            derive_seed(global, "train"), derive_seed(global, "mapper"),  derive_seed(global, "baseline")};
}

inline io::Dataset load_required_dataset(const std::string& path, const char* key) {
    if (path.empty()) throw ConfigError(std::string(key) + " is not set");
    if (!fs::exists(path)) throw ConfigError(std::string(key) + ": dataset file '" + path + "' does not exist");
    return io::load_dataset(path);
}

inline std::vector<std::vector<double>> normalized_features(const io::Dataset& d) {
    std::vector<std::vector<double>> x;
    for (std::size_t i = 0; i < d.samples.size(); ++i) x.push_back(d.normalized(i));
    return x;
}

inline SpikeDataset encode_dataset(const io::Dataset& d, const EncoderConfig& enc) {
    const auto x = normalized_features(d);
    const auto trains = encode_all(x, enc);
    SpikeDataset out;
    for (std::size_t i = 0; i < trains.size(); ++i) out.push_back({trains[i], d.samples[i].label});
    return out;
}

inline void check_compatible(const NetworkTopology& net, const io::Dataset& d, const std::string& source) {
    if (d.n_features != net.n_inputs())
        throw ConfigError(source + ": dataset has " + std::to_string(d.n_features) + " features, network expects " +
                          std::to_string(net.n_inputs()));
    if (d.n_classes > net.n_outputs())
        throw ConfigError(source + ": dataset has " + std::to_string(d.n_classes) + " classes, network has " +
                          std::to_string(net.n_outputs()) + " outputs");
}

inline Mapping optimized_mapping(const SynapseGraph& g, const ChipModel& chip, MapperConfig mc, std::uint64_t seed) {
    mc.seed = seed;
    return map_optimize(g, chip, mc, map_greedy(g, chip));
}

struct EvalOptions {
    std::string label;
    std::string dataset;
    std::string network;
    bool adaptive = false;
    AdaptConfig adapt;
    bool record_timing = false;
    std::ostream* trajectory = nullptr; // activity CSV of the first sample
};

/// Simulates every sample, classifies it and accounts energy under `mapping`.
inline io::RunReport evaluate_run(const NetworkTopology& net, const SpikeDataset& data, const SynapseGraph& g,
                                  const Mapping& mapping, const ChipModel& chip, const std::string& encoder,
                                  const EvalOptions& opt, StageTimings* timings_out = nullptr) {
    using clock = std::chrono::steady_clock;
    if (data.empty()) throw ValueError("evaluation set is empty");
    io::RunReport r;
    r.label = opt.label;
    r.dataset = opt.dataset;
    r.network = opt.network;
    r.chip = chip.name;
    r.encoder = encoder;
    r.timesteps = net.n_timesteps;
    r.adaptive = opt.adaptive;
    r.n_samples = data.size();
    std::vector<EnergyReport> per;
    std::size_t correct = 0, silent = 0;
    StageTimings t;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto t0 = clock::now();
        RunResult res;
        if (opt.adaptive) {
            auto a = run_adaptive(net, data[i].input, opt.adapt);
            if (i == 0 && opt.trajectory) write_trajectory_csv(*opt.trajectory, a.trajectory);
            res = std::move(a.result);
        } else {
            res = run_network(net, data[i].input);
        }
        const auto t1 = clock::now();
        const auto c = classify(res.output);
        const auto t2 = clock::now();
        correct += !c.low_confidence && c.index == data[i].label;
        silent += c.low_confidence;
        per.push_back(account(res.state, chip, &g, &mapping));
        t.network_s += std::chrono::duration<double>(t1 - t0).count();
        t.decode_s += std::chrono::duration<double>(t2 - t1).count();
    }
    const double n = static_cast<double>(data.size());
    r.accuracy = static_cast<double>(correct) / n;
    r.low_confidence = static_cast<double>(silent) / n;
    r.energy = accumulate(per);
    r.spikes_per_inference = static_cast<double>(r.energy.n_spikes) / n;
    r.sops_per_inference = static_cast<double>(r.energy.n_sop) / n;
    r.energy_per_inference_j = r.energy.e_total / n;
    r.utilization = utilization_report(mapping, chip);
    if (timings_out) *timings_out = t;
    if (opt.record_timing) r.timings = t;
    return r;
}

inline void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& h) {
    os << "epoch,task_loss,hw_loss,total,train_acc,val_acc,spikes_per_inference\n";
    for (const auto& e : h)
        os << e.epoch << ',' << io::fmt(e.loss.task_loss) << ',' << io::fmt(e.loss.hw_loss) << ','
           << io::fmt(e.loss.total) << ',' << io::fmt(e.train_acc) << ',' << (e.val_acc ? io::fmt(*e.val_acc) : "")
           << ',' << io::fmt(e.spikes_per_inference) << '\n';
}

inline void write_text(const fs::path& p, const std::string& s) { io::write_atomic(p, s); }

struct TrainOutcome {
    TrainResult result;
    io::RunReport summary;
};

/// Trains the configured preset and writes network.txt, mapping.txt,
/// history.csv and train_summary.md into the output directory.
inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto seeds = derive_seeds(cfg.seed);
    const auto chip = io::resolve_chip(cfg.chip);
    const auto train_set = load_required_dataset(cfg.dataset, "run.dataset");
    std::optional<io::Dataset> test_set;
    if (!cfg.test_dataset.empty()) test_set = load_required_dataset(cfg.test_dataset, "run.test_dataset");

    auto net = make_preset(cfg.preset, train_set.n_features, train_set.n_classes, cfg.neuron, cfg.encoder.timesteps);
    init_weights(net, seeds.init);
    const auto graph = synapse_graph(net);
    check_feasible(graph, chip);
    if (test_set) check_compatible(net, *test_set, cfg.test_dataset);

    EncoderConfig enc = cfg.encoder;
    enc.seed = seeds.encoder;
    const auto data = encode_dataset(train_set, enc);
    if (cfg.init_rate > 0.0) calibrate_init(net, data, cfg.init_rate);
    SpikeDataset val;
    if (test_set) {
        enc.seed = seeds.encoder_test;
        val = encode_dataset(*test_set, enc);
    }
    TrainConfig tc = cfg.train;
    tc.seed = seeds.train;
    MapperConfig mc = cfg.mapper;
    log << "training " << cfg.preset << " on " << train_set.samples.size() << " samples (" << net.n_neurons()
        << " neurons, " << graph.n_synapses() << " synapses) for " << tc.epochs << " epochs\n";
    auto result = train(net, data, test_set ? &val : nullptr, chip, tc, mc);
    for (const auto& e : result.history)
        log << "epoch " << e.epoch << " loss " << io::fixed(e.loss.total, 4) << " train_acc "
            << io::fixed(e.train_acc, 4) << (e.val_acc ? " val_acc " + io::fixed(*e.val_acc, 4) : "") << '\n';

    const fs::path out = cfg.out;
    io::save_network_file((out / "network.txt").string(), result.net);
    write_text(out / "mapping.txt", io::mapping_to_text(result.mapping));
    std::ostringstream hist;
    write_history_csv(hist, result.history);
    write_text(out / "history.csv", hist.str());

    EvalOptions opt;
    opt.label = cfg.preset + " (" + to_string(cfg.encoder.scheme) + ")";
    opt.dataset = test_set ? cfg.test_dataset : cfg.dataset;
    opt.network = (out / "network.txt").string();
    auto summary = evaluate_run(result.net, test_set ? val : data, graph, result.mapping, chip,
                                to_string(cfg.encoder.scheme), opt);
    write_text(out / "train_summary.md", "# Training summary\n\n" + io::summary_table({summary}));
    log << "accuracy " << io::fixed(100 * summary.accuracy, 2) << "% on " << (test_set ? "test" : "training")
        << " set, wrote " << out.string() << "\n";
    return {std::move(result), std::move(summary)};
}

struct MapOutcome {
    Mapping greedy, optimized;
    double random_median_traffic = 0.0; // inter-core synapse fraction
};

inline double traffic_fraction(const MappingStats& s) {
    return s.total_synapses ? static_cast<double>(s.inter_core_synapses) / static_cast<double>(s.total_synapses) : 0.0;
}

/// Greedy placement refined by local search, compared with random placements.
/// Writes mapping.txt and utilization.md.
inline MapOutcome cmd_map(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.network.empty()) throw ConfigError("run.network is not set");
    const auto seeds = derive_seeds(cfg.seed);
    const auto net = io::load_network_file(cfg.network);
    const auto chip = io::resolve_chip(cfg.chip);
    const auto g = synapse_graph(net);
    check_feasible(g, chip);
    MapOutcome m;
    m.greedy = map_greedy(g, chip);
    MapperConfig mc = cfg.mapper;
    mc.seed = seeds.mapper;
    m.optimized = map_optimize(g, chip, mc, m.greedy);

    Rng rng(seeds.baseline);
    std::vector<double> traffic;
    std::vector<Mapping> randoms;
    for (std::size_t i = 0; i < cfg.random_baseline; ++i) {
        randoms.push_back(random_mapping(g, chip, rng));
        traffic.push_back(traffic_fraction(randoms.back().stats));
    }
    std::vector<std::size_t> idx(traffic.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return traffic[a] < traffic[b]; });
    const auto& median = randoms[idx[idx.size() / 2]];
    std::vector<double> sorted = traffic;
    std::sort(sorted.begin(), sorted.end());
    m.random_median_traffic = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                                : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);

    const fs::path out = cfg.out;
    write_text(out / "mapping.txt", io::mapping_to_text(m.optimized));
    std::ostringstream md;
    md << "# Mapping on " << chip.name << "\n\n" << g.n_neurons << " neurons, " << g.n_synapses() << " synapses, "
       << chip.n_cores << " cores.\n\n| Mapping | Cores used | Core utilization (%) | Synaptic memory (%) | "
       << "Inter-core synapses (%) | hw_loss |\n|---|---:|---:|---:|---:|---:|\n";
    auto row = [&](const std::string& name, const Mapping& mp) {
        const auto u = utilization_report(mp, chip);
        md << "| " << name << " | " << mp.stats.n_cores_used << " | " << io::fixed(u.core_pct, 2) << " | "
           << io::fixed(u.memory_pct, 2) << " | " << io::fixed(u.traffic_pct, 2) << " | "
           << io::fixed(hw_loss(mp.stats, chip, mc), 6) << " |\n";
    };
    row("random (median of " + std::to_string(cfg.random_baseline) + ")", median);
    row("greedy", m.greedy);
    row("optimized", m.optimized);
    const double opt_t = traffic_fraction(m.optimized.stats);
    const double reduction = m.random_median_traffic > 0 ? 1.0 - opt_t / m.random_median_traffic : 0.0;
    md << "\nInter-core synapse fraction reduced by " << io::fixed(100 * reduction, 1)
       << "% against the random median.\n";
    write_text(out / "utilization.md", md.str());
    log << md.str();
    return m;
}

/// Evaluates a saved network on the test set; writes report.json, energy.csv,
/// run.md and, with adaptation and `trajectory`, the threshold trajectory of
/// the first sample as trajectory.csv.
inline io::RunReport cmd_run(const RunConfig& cfg, std::ostream& log, bool trajectory = false) {
    cfg.validate();
    if (cfg.network.empty()) throw ConfigError("run.network is not set");
    const auto seeds = derive_seeds(cfg.seed);
    const auto net = io::load_network_file(cfg.network);
    const auto chip = io::resolve_chip(cfg.chip);
    const std::string test_path = cfg.test_dataset.empty() ? cfg.dataset : cfg.test_dataset;
    const auto test_set = load_required_dataset(test_path, "run.test_dataset");
    check_compatible(net, test_set, test_path);
    const auto g = synapse_graph(net);
    check_feasible(g, chip);
    const Mapping mapping = cfg.mapping.empty()
                                ? optimized_mapping(g, chip, cfg.mapper, seeds.mapper)
                                : io::mapping_from_text(io::read_file(cfg.mapping), g, chip, cfg.mapping);

    EncoderConfig enc = cfg.encoder;
    enc.seed = seeds.encoder_test;
    if (enc.timesteps != net.n_timesteps)
        log << "note: using the network horizon T = " << net.n_timesteps << " instead of encoder.timesteps = "
            << enc.timesteps << '\n';
    enc.timesteps = net.n_timesteps;
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = encode_dataset(test_set, enc);
    const double encode_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EvalOptions opt;
    opt.label = std::string(to_string(enc.scheme)) + (cfg.adaptive ? " + adaptive" : "");
    opt.dataset = test_path;
    opt.network = cfg.network;
    opt.adaptive = cfg.adaptive;
    opt.adapt = cfg.adapt;
    opt.record_timing = cfg.record_timing;
    std::ostringstream traj;
    if (cfg.adaptive && trajectory) opt.trajectory = &traj;
    StageTimings timings;
    auto report = evaluate_run(net, data, g, mapping, chip, to_string(enc.scheme), opt, &timings);
    timings.encode_s = encode_s;
    if (cfg.record_timing) report.timings = timings;

    const fs::path out = cfg.out;
    write_text(out / "report.json", io::report_to_text(report));
    std::ostringstream csv;
    write_energy_csv(csv, report.energy);
    write_text(out / "energy.csv", csv.str());
    write_text(out / "run.md", "# Run\n\n" + io::summary_table({report}) + "\n" + io::energy_table({report}));
    if (cfg.adaptive && trajectory) write_text(out / "trajectory.csv", traj.str());

    log << "accuracy " << io::fixed(100 * report.accuracy, 2) << "%, " << io::fixed(report.spikes_per_inference, 1)
        << " spikes/inference, " << io::fixed(report.energy_per_inference_j * 1e6, 4) << " uJ/inference\n";
    const double n = static_cast<double>(data.size());
    log << "latency per inference (ms): encode " << io::fixed(1e3 * timings.encode_s / n, 4) << ", network "
        << io::fixed(1e3 * timings.network_s / n, 4) << ", decode " << io::fixed(1e3 * timings.decode_s / n, 4)
        << '\n';
    return report;
}

/// Renders comparison tables and charts for saved run reports. Unreadable
/// files are skipped with a warning; fails only if none can be read.
inline std::vector<io::RunReport> cmd_report(const std::vector<std::string>& paths, const std::string& out_dir,
                                             std::ostream& log) {
    if (paths.empty()) throw ConfigError("report: no report files given");
    std::vector<io::RunReport> reports;
    for (const auto& p : paths) {
        try {
            reports.push_back(io::report_from_json(io::read_file(p), p));
        } catch (const ConfigError& e) {
            log << "warning: skipping " << p << ": " << e.what() << '\n';
        }
    }
    if (reports.empty()) throw ConfigError("report: none of the given reports could be read");
    std::ostringstream md;
    md << "# Report\n\n";
    bool mixed = false;
    for (const auto& r : reports) mixed |= r.dataset != reports.front().dataset;
    if (mixed) {
        md << "> **Warning:** these reports were produced on different datasets:";
        for (const auto& r : reports) md << ' ' << r.dataset << ';';
        md << " ratios compare unlike workloads.\n\n";
        log << "warning: reports come from different datasets\n";
    }
    md << "## Summary\n\n" << io::summary_table(reports) << "\n## Energy breakdown\n\n" << io::energy_table(reports)
       << "\n## Hardware utilization\n\n" << io::utilization_table(reports)
       << "\n![utilization](utilization.svg) ![energy](energy.svg) ![spikes](spikes.svg)\n";
    const fs::path out = out_dir;
    write_text(out / "report.md", md.str());
    write_text(out / "utilization.svg", io::render_svg(io::utilization_chart(reports)));
    write_text(out / "energy.svg", io::render_svg(io::energy_chart(reports)));
    write_text(out / "spikes.svg", io::render_svg(io::spike_chart(reports)));
    log << "wrote " << (out / "report.md").string() << '\n';
    return reports;
}

struct AblationOutcome {
    std::vector<io::RunReport> rows;
    std::size_t rate_timesteps = 0;
    std::size_t hybrid_timesteps = 0;
};

/// Four-row ablation: rate baseline, hybrid encoding at matched decoding
/// error, optimized core mapping, and runtime threshold adaptation. The first
/// two rows use a seeded random valid placement as the naive mapping.
inline AblationOutcome cmd_ablate(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto seeds = derive_seeds(cfg.seed);
    const auto chip = io::resolve_chip(cfg.chip);
    auto train_set = load_required_dataset(cfg.dataset, "run.dataset");
    io::Dataset test_set;
    std::string test_name = cfg.test_dataset;
    if (!cfg.test_dataset.empty()) {
        test_set = load_required_dataset(cfg.test_dataset, "run.test_dataset");
    } else {
        auto parts = io::split(train_set, train_set.samples.size() * 3 / 4);
        train_set = std::move(parts.first);
        test_set = std::move(parts.second);
        test_name = cfg.dataset + " (held-out quarter)";
        if (test_set.samples.empty()) throw ConfigError("ablate: dataset too small to hold out a test split");
    }

    EncoderConfig rate = cfg.encoder;
    rate.scheme = EncodingScheme::rate;
    rate.seed = seeds.encoder;
    EncoderConfig hybrid = cfg.encoder;
    hybrid.scheme = EncodingScheme::hybrid;
    const auto x = normalized_features(train_set);
    const double rate_err = decode_error(x, encode_all(x, rate));
    hybrid.timesteps = horizon_for_error(x, hybrid, rate_err, rate.timesteps);
    if (hybrid.timesteps == 0) hybrid.timesteps = rate.timesteps;
    log << "rate coding T = " << rate.timesteps << " (decode error " << io::fixed(rate_err, 4)
        << "), hybrid matched at T = " << hybrid.timesteps << '\n';

    AblationOutcome out;
    out.rate_timesteps = rate.timesteps;
    out.hybrid_timesteps = hybrid.timesteps;
    TrainConfig tc = cfg.train;
    tc.seed = seeds.train;

    auto trained = [&](const EncoderConfig& enc, SpikeDataset& test_spikes) {
        auto net = make_preset(cfg.preset, train_set.n_features, train_set.n_classes, cfg.neuron, enc.timesteps);
        init_weights(net, seeds.init);
        auto e = enc;
        const auto data = encode_dataset(train_set, e);
        if (cfg.init_rate > 0.0) calibrate_init(net, data, cfg.init_rate);
        e.seed = seeds.encoder_test;
        test_spikes = encode_dataset(test_set, e);
        return train(net, data, nullptr, chip, tc, cfg.mapper);
    };

    EvalOptions opt;
    opt.dataset = test_name;
    SpikeDataset rate_test, hybrid_test;
    const auto rate_run = trained(rate, rate_test);
    const auto hybrid_run = trained(hybrid, hybrid_test);
    const auto g = synapse_graph(rate_run.net);
    Rng placement(seeds.baseline);
    const auto naive = random_mapping(g, chip, placement);
    const auto mapped = optimized_mapping(g, chip, cfg.mapper, seeds.mapper);

    opt.label = "Baseline (rate coding)";
    out.rows.push_back(evaluate_run(rate_run.net, rate_test, g, naive, chip, "rate", opt));
    opt.label = "+ Hybrid encoding";
    out.rows.push_back(evaluate_run(hybrid_run.net, hybrid_test, g, naive, chip, "hybrid", opt));
    opt.label = "+ Core mapping";
    out.rows.push_back(evaluate_run(hybrid_run.net, hybrid_test, g, mapped, chip, "hybrid", opt));
    opt.label = "+ Adaptive threshold";
    opt.adaptive = true;
    opt.adapt = cfg.adapt;
    out.rows.push_back(evaluate_run(hybrid_run.net, hybrid_test, g, mapped, chip, "hybrid", opt));

    const fs::path dir = cfg.out;
    std::ostringstream md;
    md << "# Ablation\n\nDataset: " << test_name << ", preset " << cfg.preset << ", chip " << chip.name
       << ". Rate coding at T = " << rate.timesteps << ", hybrid coding at T = " << hybrid.timesteps
       << " (matched mean decoding error).\n\n"
       << io::summary_table(out.rows) << "\n" << io::energy_table(out.rows) << "\n"
       << io::utilization_table(out.rows);
    write_text(dir / "ablation.md", md.str());
    for (std::size_t i = 0; i < out.rows.size(); ++i)
        write_text(dir / ("ablation_" + std::to_string(i + 1) + ".json"), io::report_to_text(out.rows[i]));
    write_text(dir / "ablation_spikes.svg", io::render_svg(io::spike_chart(out.rows)));
    log << io::summary_table(out.rows);
    return out;
}

/// Synthetic dataset generation: "blobs" (2 classes) or "digits" (8x8, 10
/// classes). With `n_test` > 0 the last n_test samples of one draw go to
/// `test_path`, so both files share the class structure.
inline io::Dataset cmd_gen_data(const std::string& kind, std::size_t n, std::size_t features, std::uint64_t seed,
                                const std::string& path, bool binary, std::size_t n_test = 0,
                                const std::string& test_path = "") {
    if (n == 0) throw ConfigError("gen-data: sample count must be positive");
    if (n_test > 0 && test_path.empty()) throw ConfigError("gen-data: a test split needs a test output path");
    io::Dataset d;
    if (kind == "blobs") d = io::generate_blobs(n + n_test, features, seed);
    else if (kind == "digits") d = io::generate_digits(n + n_test, seed);
    else throw ConfigError("unknown dataset kind '" + kind + "' (blobs, digits)");
    auto [train_part, test_part] = io::split(d, n);
    io::save_dataset(path, train_part, binary);
    if (n_test > 0) io::save_dataset(test_path, test_part, binary);
    return train_part;
}

} // namespace edgesnn::workflows
