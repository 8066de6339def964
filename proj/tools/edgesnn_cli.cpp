// edgesnn command-line front end.
//
// Settings are layered: built-in defaults, then --config file, then
// EDGESNN_* environment variables, then --set KEY=VALUE and dedicated flags.
// Exit codes: 0 success, 1 usage or configuration error, 2 computation error.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "edgesnn/workflows.hpp"

namespace {

using edgesnn::io::RunConfig;

struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> chip;
    std::optional<std::string> out;
    std::optional<std::string> adaptive;
    bool record_timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "configuration file (key = value lines)");
    cmd->add_option("--set", o.sets, "override one setting, KEY=VALUE (repeatable)");
    cmd->add_option("--seed", o.seed, "global seed");
    cmd->add_option("--chip", o.chip, "chip preset name or chip file");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--adaptive", o.adaptive, "runtime threshold adaptation")->check(CLI::IsMember({"on", "off"}));
    cmd->add_flag("--record-timing", o.record_timing, "write wall-clock timings into artifacts");
}

RunConfig resolve(const CommonOptions& o) {
    RunConfig c;
    if (!o.config.empty()) edgesnn::io::apply_config_file(c, o.config);
    edgesnn::io::apply_env(c);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw edgesnn::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        edgesnn::io::set_key(c, edgesnn::io::trim(std::string_view(kv).substr(0, eq)),
                             std::string_view(kv).substr(eq + 1), "--set");
    }
    if (o.seed) c.seed = *o.seed;
    if (o.chip) c.chip = *o.chip;
    if (o.out) c.out = *o.out;
    if (o.adaptive) c.adaptive = *o.adaptive == "on";
    if (o.record_timing) c.record_timing = true;
    c.validate();
    return c;
}

} // namespace

int main(int argc, char** argv) {
    namespace wf = edgesnn::workflows;
    CLI::App app{"edgesnn: spiking network toolkit for a modeled neuromorphic chip"};
    app.require_subcommand(1);

    CommonOptions common;
    auto* train = app.add_subcommand("train", "train a preset network and map it onto the chip");
    auto* map = app.add_subcommand("map", "place a saved network onto the chip and report utilization");
    auto* run = app.add_subcommand("run", "evaluate a saved network: accuracy, spikes, energy, latency");
    auto* ablate = app.add_subcommand("ablate", "rate, hybrid, mapping and adaptation ablation");
    auto* show = app.add_subcommand("show-config", "print every setting with its current value");
    for (auto* c : {train, map, run, ablate, show}) add_common(c, common);
    bool trajectory = false;
    run->add_flag("--trajectory", trajectory, "with --adaptive on, dump the threshold trajectory CSV");

    std::vector<std::string> report_files;
    std::string report_out = "out";
    auto* report = app.add_subcommand("report", "comparison tables and charts from run reports");
    report->add_option("reports", report_files, "report.json files")->required();
    report->add_option("--out", report_out, "output directory");

    std::string kind = "blobs", data_out, test_out;
    std::size_t n_samples = 400, n_test = 0, n_features = 16;
    std::uint64_t data_seed = 1;
    bool binary = false;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
    gen->add_option("--kind", kind, "blobs or digits")->check(CLI::IsMember({"blobs", "digits"}));
    gen->add_option("--samples", n_samples, "sample count");
    gen->add_option("--features", n_features, "feature count (blobs)");
    gen->add_option("--seed", data_seed, "generator seed");
    gen->add_flag("--binary", binary, "packed binary format");
    gen->add_option("--output", data_out, "dataset file")->required();
    gen->add_option("--test-samples", n_test, "extra samples from the same draw for a test file");
    gen->add_option("--test-output", test_out, "test dataset file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            const auto d = wf::cmd_gen_data(kind, n_samples, n_features, data_seed, data_out, binary, n_test, test_out);
            std::cout << "wrote " << d.samples.size() << " samples to " << data_out << '\n';
        } else if (*report) {
            wf::cmd_report(report_files, report_out, std::cerr);
        } else {
            const auto cfg = resolve(common);
            if (*show) edgesnn::io::write_config(std::cout, cfg);
            else if (*train) wf::cmd_train(cfg, std::cout);
            else if (*map) wf::cmd_map(cfg, std::cout);
            else if (*run) wf::cmd_run(cfg, std::cout, trajectory);
            else if (*ablate) wf::cmd_ablate(cfg, std::cout);
        }
    } catch (const edgesnn::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
