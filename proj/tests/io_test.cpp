#include <unistd.h>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "edgesnn/io/config.hpp"
#include "edgesnn/io/dataset.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/io/hardware_files.hpp"
#include "edgesnn/io/network_file.hpp"
#include "edgesnn/io/report.hpp"
#include "edgesnn/presets.hpp"
#include "reference_sim.hpp"

using namespace edgesnn;
namespace fs = std::filesystem;

namespace {

// Per-process, since ctest may run test cases of one binary concurrently.
fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("edgesnn_io_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Format, ShortestFormRoundTrips) {
    Rng rng(4);
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
        double y = 0;
        ASSERT_TRUE(io::parse_number(io::fmt(x), y));
        EXPECT_EQ(x, y);
    }
    EXPECT_EQ(io::fmt(0.5), "0.5");
    EXPECT_EQ(io::fixed(2.0 / 3.0, 3), "0.667");
}

TEST(Format, AtomicWriteReplacesWholeFileAndLeavesNoTemp) {
    const auto dir = scratch_dir("atomic");
    const auto p = dir / "nested" / "a.txt";
    io::write_atomic(p, "first version\n");
    io::write_atomic(p, "second\n");
    EXPECT_EQ(io::read_file(p.string()), "second\n");
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(p.parent_path())) files += e.is_regular_file();
    EXPECT_EQ(files, 1u);
}

TEST(Format, MissingFileIsAConfigError) {
    EXPECT_THROW(io::read_file("/nonexistent/edgesnn.txt"), ConfigError);
}

TEST(Config, DefaultsValidateAndShowConfigRoundTrips) {
    io::RunConfig c;
    EXPECT_NO_THROW(c.validate());
    c.seed = 42;
    c.encoder.alpha = 0.25;
    c.adapt.mode = AdaptMode::homeostatic;
    c.neuron.reset = ResetMode::hard;
    std::ostringstream os;
    io::write_config(os, c);
    io::RunConfig back;
    io::apply_config_text(back, os.str(), "shown.cfg");
    std::ostringstream again;
    io::write_config(again, back);
    EXPECT_EQ(os.str(), again.str());
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.adapt.mode, AdaptMode::homeostatic);
}

TEST(Config, EveryKeyIsPrintedWithItsDefault) {
    io::RunConfig c;
    std::ostringstream os;
    io::write_config(os, c);
    for (const auto& f : io::config_fields(c))
        EXPECT_NE(os.str().find(f.key + " = " + f.get()), std::string::npos) << f.key;
}

TEST(Config, ErrorsNameFileAndLine) {
    io::RunConfig c;
    const auto unknown = error_of([&] { io::apply_config_text(c, "run.seed = 3\n\nfoo.bar = 1\n", "a.cfg"); });
    EXPECT_NE(unknown.find("a.cfg:3"), std::string::npos) << unknown;
    EXPECT_NE(unknown.find("foo.bar"), std::string::npos);

    io::RunConfig d;
    const auto bad_number = error_of([&] { io::apply_config_text(d, "# x\ntrain.epochs = many\n", "b.cfg"); });
    EXPECT_NE(bad_number.find("b.cfg:2"), std::string::npos) << bad_number;

    io::RunConfig e;
    const auto out_of_range = error_of([&] { io::apply_config_text(e, "run.seed = 1\nneuron.beta = 2\n", "c.cfg"); });
    EXPECT_NE(out_of_range.find("c.cfg:2"), std::string::npos) << out_of_range;

    io::RunConfig f;
    EXPECT_THROW(io::apply_config_text(f, "no equals sign\n", "d.cfg"), ParseError);
}

TEST(Config, EnvironmentOverridesUsePrefixedNames) {
    EXPECT_EQ(io::env_name("adapt.a_target"), "EDGESNN_ADAPT_A_TARGET");
    const std::map<std::string, std::string> env{{"EDGESNN_RUN_SEED", "9"}, {"EDGESNN_ENCODER_SCHEME", "rate"}};
    auto getenv = [&](const char* n) -> const char* {
        const auto it = env.find(n);
        return it == env.end() ? nullptr : it->second.c_str();
    };
    io::RunConfig c;
    io::apply_env(c, getenv);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.encoder.scheme, EncodingScheme::rate);

    const std::map<std::string, std::string> bad{{"EDGESNN_TRAIN_EPOCHS", "x"}};
    io::RunConfig d;
    const auto msg = error_of([&] {
        io::apply_env(d, [&](const char* n) -> const char* {
            const auto it = bad.find(n);
            return it == bad.end() ? nullptr : it->second.c_str();
        });
    });
    EXPECT_NE(msg.find("EDGESNN_TRAIN_EPOCHS"), std::string::npos) << msg;
}

TEST(NetworkFile, RoundTripIsByteIdenticalOnRandomNets) {
    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        const auto net = edgesnn::testing::random_network(rng, 32, 3, 20);
        const auto text = io::save_network(net);
        const auto back = io::load_network(text);
        EXPECT_EQ(io::save_network(back), text);
        const auto in = edgesnn::testing::random_train(rng, net.n_inputs(), net.n_timesteps, 0.4);
        EXPECT_EQ(run_network(back, in).output, run_network(net, in).output);
    }
}

TEST(NetworkFile, PresetsRoundTrip) {
    for (const auto& name : preset_names()) {
        auto net = make_preset(name, 64, 10, NeuronParams{}, 12);
        init_weights(net, 3);
        const auto text = io::save_network(net);
        EXPECT_EQ(io::save_network(io::load_network(text)), text) << name;
    }
}

TEST(NetworkFile, CorruptFilesNameTheOffendingSection) {
    NetworkTopology net;
    net.n_timesteps = 4;
    net.layers = {dense_layer(3, 2), dense_layer(2, 2)};
    init_weights(net, 1);
    const auto good = io::save_network(net);

    auto truncated = good.substr(0, good.rfind('\n', good.size() - 2) + 1);
    const auto e1 = error_of([&] { io::load_network(truncated, "net.txt"); });
    EXPECT_NE(e1.find("[weights 1]"), std::string::npos) << e1;

    auto bad_weight = good;
    bad_weight.replace(bad_weight.find("[weights 0]\n") + 12, 1, "z");
    const auto e2 = error_of([&] { io::load_network(bad_weight, "net.txt"); });
    EXPECT_NE(e2.find("[weights 0]"), std::string::npos) << e2;
    EXPECT_NE(e2.find("net.txt:"), std::string::npos) << e2;

    auto bad_beta = good;
    bad_beta.replace(bad_beta.find("beta = "), 7, "beta = 7");
    const auto e3 = error_of([&] { io::load_network(bad_beta, "net.txt"); });
    EXPECT_NE(e3.find("[layer 0]"), std::string::npos) << e3;

    auto no_meta = good.substr(good.find("[layer 0]"));
    EXPECT_NE(error_of([&] { io::load_network(no_meta); }).find("[meta]"), std::string::npos);

    auto version = good;
    version.replace(version.find("version = 1"), 11, "version = 9");
    EXPECT_THROW(io::load_network(version), ParseError);
}

io::Dataset small_dataset() {
    io::Dataset d{3, 2, -1.0, 1.0, {}};
    d.samples = {{{-1.0, 0.0, 0.25}, 0}, {{1.0, 0.5, -0.125}, 1}, {{0.1, 0.2, 0.3}, 1}};
    return d;
}

TEST(DatasetFile, TextAndBinaryRoundTrip) {
    const auto d = small_dataset();
    for (const auto& back : {io::dataset_from_text(io::dataset_to_text(d)),
                             io::dataset_from_binary(io::dataset_to_binary(d))}) {
        EXPECT_EQ(back.n_features, 3u);
        EXPECT_EQ(back.n_classes, 2u);
        EXPECT_EQ(back.range_lo, -1.0);
        ASSERT_EQ(back.samples.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(back.samples[i].label, d.samples[i].label);
            EXPECT_EQ(back.samples[i].features, d.samples[i].features);
        }
    }
    const auto bin = io::dataset_to_binary(d);
    EXPECT_TRUE(io::is_binary_dataset(bin));
    EXPECT_EQ(bin.substr(0, 4), "ESDS");
    // u32 version 1, little-endian
    EXPECT_EQ(static_cast<unsigned char>(bin[4]), 1);
    EXPECT_EQ(bin[5], 0);
}

TEST(DatasetFile, FileLoaderDetectsFormat) {
    const auto dir = scratch_dir("dataset");
    const auto d = small_dataset();
    io::save_dataset((dir / "a.txt").string(), d, false);
    io::save_dataset((dir / "a.bin").string(), d, true);
    EXPECT_EQ(io::load_dataset((dir / "a.txt").string()).samples[1].features,
              io::load_dataset((dir / "a.bin").string()).samples[1].features);
}

TEST(DatasetFile, InvariantsAreEnforced) {
    auto bad_label = io::dataset_to_text(small_dataset());
    bad_label.replace(bad_label.rfind("\n1,"), 3, "\n5,");
    EXPECT_THROW(io::dataset_from_text(bad_label), ParseError);

    auto out_of_range = io::dataset_to_text(small_dataset());
    out_of_range.replace(out_of_range.find("0.25"), 4, "3.25");
    EXPECT_THROW(io::dataset_from_text(out_of_range), ParseError);

    auto short_row = io::dataset_to_text(small_dataset()) + "0,0.1\n";
    const auto msg = error_of([&] { io::dataset_from_text(short_row, "d.txt"); });
    EXPECT_NE(msg.find("d.txt:5"), std::string::npos) << msg;

    auto bin = io::dataset_to_binary(small_dataset());
    EXPECT_THROW(io::dataset_from_binary(bin.substr(0, bin.size() - 3)), ParseError);
}

TEST(DatasetFile, NormalizationMapsRangeOntoUnitInterval) {
    const auto d = small_dataset();
    EXPECT_EQ(d.normalized(0), (std::vector<double>{0.0, 0.5, 0.625}));
}

TEST(Generators, DeterministicAndWithinRange) {
    const auto a = io::generate_blobs(50, 6, 3), b = io::generate_blobs(50, 6, 3);
    EXPECT_EQ(io::dataset_to_text(a), io::dataset_to_text(b));
    EXPECT_NO_THROW(a.validate());
    const auto digits = io::generate_digits(40, 2);
    EXPECT_NO_THROW(digits.validate());
    EXPECT_EQ(digits.n_features, 64u);
    EXPECT_EQ(digits.n_classes, 10u);
    EXPECT_EQ(digits.samples[13].label, 3u);
}

TEST(Generators, BlobsAreLinearlySeparableByCentroid) {
    const auto d = io::generate_blobs(400, 16, 11);
    std::vector<std::vector<double>> mean(2, std::vector<double>(16, 0.0));
    for (const auto& s : d.samples)
        for (std::size_t f = 0; f < 16; ++f) mean[s.label][f] += s.features[f] / 200.0;
    std::size_t correct = 0;
    for (const auto& s : d.samples) {
        double d0 = 0, d1 = 0;
        for (std::size_t f = 0; f < 16; ++f) {
            d0 += std::pow(s.features[f] - mean[0][f], 2);
            d1 += std::pow(s.features[f] - mean[1][f], 2);
        }
        correct += (d1 < d0) == (s.label == 1);
    }
    EXPECT_EQ(correct, d.samples.size());
}

TEST(HardwareFiles, MappingRoundTripAndValidation) {
    NetworkTopology net;
    net.n_timesteps = 2;
    net.layers = {dense_layer(4, 3), dense_layer(3, 2)};
    const auto g = synapse_graph(net);
    ChipModel chip;
    chip.n_cores = 3;
    chip.neurons_per_core = 4;
    chip.synapses_per_core = 20;
    const auto m = map_greedy(g, chip);
    const auto back = io::mapping_from_text(io::mapping_to_text(m), g, chip);
    EXPECT_EQ(back.assignment, m.assignment);
    EXPECT_EQ(back.stats, m.stats);

    auto text = io::mapping_to_text(m);
    text.replace(text.find("\n2 "), 3, "\n2 7");
    const auto msg = error_of([&] { io::mapping_from_text(text, g, chip, "m.txt"); });
    EXPECT_NE(msg.find("m.txt:4"), std::string::npos) << msg;

    std::string crowded = "# all on one core\n";
    for (std::size_t n = 0; n < g.n_neurons; ++n) crowded += std::to_string(n) + " 0\n";
    EXPECT_THROW(io::mapping_from_text(crowded, g, chip), CapacityError);
}

TEST(HardwareFiles, ChipFilesRoundTripAndResolve) {
    auto chip = *chip_preset("desk-16");
    chip.e_routing_pj = 0.5;
    const auto back = io::chip_from_text(io::chip_to_text(chip));
    EXPECT_EQ(io::chip_to_text(back), io::chip_to_text(chip));
    EXPECT_THROW(io::chip_from_text("chip.n_cores = 2\n"), ParseError);
    EXPECT_THROW(io::chip_from_text("chip.n_cores = 2\nchip.colour = red\n"), ParseError);
    EXPECT_EQ(io::resolve_chip("desk-16").n_cores, 16u);
    EXPECT_THROW(io::resolve_chip("no-such-chip"), ConfigError);
}

io::RunReport sample_report(const std::string& label, double spikes, const std::string& dataset = "d.txt") {
    io::RunReport r;
    r.label = label;
    r.dataset = dataset;
    r.chip = "desk-16";
    r.encoder = "hybrid";
    r.timesteps = 20;
    r.n_samples = 10;
    r.accuracy = 0.9;
    r.spikes_per_inference = spikes;
    r.sops_per_inference = 4 * spikes;
    r.energy.n_sop = 40 * static_cast<std::uint64_t>(spikes);
    r.energy.n_spikes = 10 * static_cast<std::uint64_t>(spikes);
    r.energy.breakdown.synaptic_ops = 2e-12 * static_cast<double>(r.energy.n_sop);
    r.energy.breakdown.spike_comm = 20e-12 * static_cast<double>(r.energy.n_spikes);
    r.energy.e_total = r.energy.breakdown.synaptic_ops + r.energy.breakdown.spike_comm;
    r.energy.gops_per_watt = 2.0 * static_cast<double>(r.energy.n_sop) / r.energy.e_total / 1e9;
    r.energy_per_inference_j = r.energy.e_total / 10;
    r.utilization = {50.0, 10.0, 25.0, {}, false};
    return r;
}

TEST(Report, JsonRoundTripIsExact) {
    auto r = sample_report("a", 123.25);
    r.timings = StageTimings{0.1, 0.2, 0.3};
    const auto text = io::report_to_text(r);
    const auto back = io::report_from_json(text, "r.json");
    EXPECT_EQ(io::report_to_text(back), text);
    EXPECT_THROW(io::report_from_json("{\"format\": \"other\"}", "x.json"), ConfigError);
    EXPECT_THROW(io::report_from_json("not json", "x.json"), ConfigError);
}

TEST(Report, RatioColumnsOnlyWithTwoOrMoreRows) {
    const auto one = io::summary_table({sample_report("a", 100)});
    EXPECT_EQ(one.find("reduction"), std::string::npos);
    const auto two = io::summary_table({sample_report("a", 100), sample_report("b", 25)});
    EXPECT_NE(two.find("Spike reduction"), std::string::npos);
    EXPECT_NE(two.find("4.0x"), std::string::npos) << two;
}

TEST(Report, ChartsAreWellFormedSvg) {
    const std::vector<io::RunReport> rs{sample_report("a & b", 100), sample_report("c", 40)};
    for (const auto& chart : {io::utilization_chart(rs), io::energy_chart(rs), io::spike_chart(rs)}) {
        const auto svg = io::render_svg(chart);
        EXPECT_EQ(svg.rfind("<svg", 0), 0u);
        EXPECT_NE(svg.find("</svg>"), std::string::npos);
        EXPECT_EQ(svg.find("a & b"), std::string::npos);
    }
}

TEST(Presets, ShapesAndErrors) {
    const auto mlp = make_preset("desk-mlp", 16, 2, NeuronParams{}, 20);
    EXPECT_EQ(mlp.n_inputs(), 16u);
    EXPECT_EQ(mlp.n_outputs(), 2u);
    EXPECT_EQ(mlp.layers.size(), 3u);
    const auto cnn = make_preset("desk-cnn", 64, 10, NeuronParams{}, 20);
    ASSERT_EQ(cnn.layers.size(), 4u);
    EXPECT_EQ(cnn.layers[0].kind, LayerKind::conv2d);
    EXPECT_EQ(cnn.layers[0].n_out, 8u * 6 * 6);
    EXPECT_EQ(cnn.layers[1].kind, LayerKind::pool2x2);
    EXPECT_EQ(cnn.layers[2].n_out, 64u);
    EXPECT_EQ(cnn.n_outputs(), 10u);
    EXPECT_THROW(make_preset("desk-cnn", 60, 10, NeuronParams{}, 20), ConfigError);
    EXPECT_THROW(make_preset("resnet", 16, 2, NeuronParams{}, 20), ConfigError);
}
