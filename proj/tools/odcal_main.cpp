// odcal: OD demand calibration experiments against a synthetic traffic
// simulator. Subcommands: gen-network, gen-gt, calibrate, report.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "odcal/experiment.hpp"
#include "odcal/generator.hpp"

namespace {

odcal::ExperimentConfig load_config(const std::string& path,
                                    const std::optional<std::uint64_t>& seed_override,
                                    const std::optional<std::string>& output_dir_override) {
    odcal::ExperimentConfig cfg = odcal::load_experiment_config(path);
    if (seed_override) cfg.master_seed = *seed_override;
    if (output_dir_override) cfg.output_dir = *output_dir_override;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OD travel demand calibration from segment speed data"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<std::string> algorithm;
    std::optional<double> threshold;
    bool paper_scale = false;

    auto* gen_net = app.add_subcommand("gen-network", "Generate a synthetic network file");
    gen_net->add_option("--config", config_path, "Generator config (JSON); defaults when omitted");
    gen_net->add_option("--output", output, "Output network file")->required();
    gen_net->add_flag("--paper-scale", paper_scale, "62 ODs with 3 routes each (186 routes)");
    gen_net->add_option("--seed", seed, "Seed override");

    auto* gen_gt = app.add_subcommand("gen-gt", "Generate ground-truth demand and measurements");
    gen_gt->add_option("--config", config_path, "Experiment config (JSON)")->required();
    gen_gt->add_option("--seed", seed, "Master seed override");
    gen_gt->add_option("--output-dir", output_dir, "Output directory override");

    auto* calibrate = app.add_subcommand("calibrate", "Run calibration for algorithms x thresholds");
    calibrate->add_option("--config", config_path, "Experiment config (JSON)")->required();
    calibrate->add_option("--algorithm", algorithm, "Restrict to one algorithm (metamodel|spsa)");
    calibrate->add_option("--threshold", threshold, "Restrict to one congestion threshold");
    calibrate->add_option("--seed", seed, "Master seed override");
    calibrate->add_option("--output-dir", output_dir, "Output directory override");

    auto* report = app.add_subcommand("report", "Aggregate calibration outputs into a table");
    report->add_option("--config", config_path, "Experiment config (JSON)")->required();
    report->add_option("--seed", seed, "Master seed override");
    report->add_option("--output-dir", output_dir, "Output directory override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_net->parsed()) {
            odcal::GeneratorConfig gc =
                paper_scale ? odcal::GeneratorConfig::paper_scale() : odcal::GeneratorConfig::demo();
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw std::runtime_error("cannot open config file: " + config_path);
                nlohmann::json j;
                in >> j;
                gc = odcal::generator_config_from_json(j);
                if (paper_scale) {
                    gc.n_od_pairs = 62;
                    gc.routes_per_od = 3;
                }
            }
            if (seed) gc.seed = *seed;
            const odcal::Network net = odcal::generate_network(gc);
            auto out = odcal::io::open_out(output);
            out << odcal::network_to_json(net).dump(2) << '\n';
        } else if (gen_gt->parsed()) {
            odcal::run_gen_gt(load_config(config_path, seed, output_dir));
        } else if (calibrate->parsed()) {
            odcal::run_calibrate(load_config(config_path, seed, output_dir), algorithm, threshold);
        } else if (report->parsed()) {
            odcal::run_report(load_config(config_path, seed, output_dir));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
