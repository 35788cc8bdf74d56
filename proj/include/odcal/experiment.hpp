#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "odcal/eval.hpp"
#include "odcal/generator.hpp"
#include "odcal/io.hpp"
#include "odcal/metamodel.hpp"
#include "odcal/network.hpp"
#include "odcal/simulator.hpp"
#include "odcal/solvers.hpp"

// Experiment orchestration: GT generation, calibration runs for both
// algorithms across congestion thresholds, and the comparison report.
// Everything is a pure function of the config file; per-run seeds derive
// from hash(master_seed, algorithm, threshold, run).

namespace odcal {

struct AlgorithmSpec {
    std::string name;  // "metamodel" | "spsa"
    nlohmann::json config = nlohmann::json::object();
};

struct ExperimentConfig {
    std::string network_path;
    std::uint64_t gt_seed = 7;
    int gt_n_reps = 10;
    SimulatorConfig simulator;
    std::vector<AlgorithmSpec> algorithms{{"metamodel", {}}, {"spsa", {}}};
    int budget = 250;
    int n_calibration_runs = 5;
    std::vector<double> thresholds{0.8, 0.9, 1.0};
    int final_eval_reps = 5;
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;
};

inline SimulatorConfig simulator_config_from_json(const nlohmann::json& j) {
    SimulatorConfig c;
    if (j.contains("demand_noise")) {
        const auto s = j.at("demand_noise").get<std::string>();
        if (s == "poisson")
            c.demand_noise = SimulatorConfig::DemandNoise::poisson;
        else if (s == "none")
            c.demand_noise = SimulatorConfig::DemandNoise::none;
        else
            throw std::runtime_error("config: demand_noise must be \"poisson\" or \"none\"");
    }
    if (j.contains("speed_noise_sigma")) c.speed_noise_sigma = j.at("speed_noise_sigma").get<double>();
    if (j.contains("param_bias_scale")) c.param_bias_scale = j.at("param_bias_scale").get<double>();
    if (j.contains("spillback_coupling")) c.spillback_coupling = j.at("spillback_coupling").get<double>();
    if (j.contains("bias_seed")) c.bias_seed = j.at("bias_seed").get<std::uint64_t>();
    if (!(c.speed_noise_sigma >= 0.0))
        throw std::runtime_error("config: speed_noise_sigma must be >= 0");
    if (!(c.spillback_coupling >= 0.0 && c.spillback_coupling <= 1.0))
        throw std::runtime_error("config: spillback_coupling must be in [0,1]");
    return c;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (!j.contains("network_path")) throw std::runtime_error("config: missing network_path");
    c.network_path = j.at("network_path").get<std::string>();
    if (j.contains("gt")) {
        const auto& g = j.at("gt");
        if (g.contains("seed")) c.gt_seed = g.at("seed").get<std::uint64_t>();
        if (g.contains("n_reps")) c.gt_n_reps = g.at("n_reps").get<int>();
    }
    if (j.contains("simulator")) c.simulator = simulator_config_from_json(j.at("simulator"));
    if (j.contains("algorithms")) {
        c.algorithms.clear();
        for (const auto& ja : j.at("algorithms")) {
            AlgorithmSpec a;
            a.name = ja.at("name").get<std::string>();
            if (a.name != "metamodel" && a.name != "spsa")
                throw std::runtime_error("config: unknown algorithm '" + a.name + "'");
            if (ja.contains("config")) a.config = ja.at("config");
            c.algorithms.push_back(std::move(a));
        }
    }
    if (j.contains("budget")) c.budget = j.at("budget").get<int>();
    if (j.contains("n_calibration_runs")) c.n_calibration_runs = j.at("n_calibration_runs").get<int>();
    if (c.n_calibration_runs < 1) throw std::runtime_error("config: n_calibration_runs must be >= 1");
    if (j.contains("thresholds")) {
        c.thresholds = j.at("thresholds").get<std::vector<double>>();
        for (double t : c.thresholds)
            if (!(t > 0.0 && t <= 1.0)) throw std::runtime_error("config: thresholds must be in (0,1]");
    }
    if (j.contains("final_eval_reps")) c.final_eval_reps = j.at("final_eval_reps").get<int>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return experiment_config_from_json(j);
}

namespace detail {

inline std::uint64_t threshold_key(double t) {
    return static_cast<std::uint64_t>(std::llround(t * 1000.0));
}

inline std::string threshold_tag(double t) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "t%.2f", t);
    return buf;
}

inline std::string run_dir(const ExperimentConfig& cfg, const std::string& algo, double thr, int run) {
    return cfg.output_dir + "/calib/" + algo + "_" + threshold_tag(thr) + "/run" + std::to_string(run);
}

}  // namespace detail

inline std::uint64_t derive_run_seed(std::uint64_t master_seed, const std::string& algorithm,
                                     double threshold, int run) {
    return rng::key_of(master_seed, rng::hash_str(algorithm), detail::threshold_key(threshold),
                       static_cast<std::uint64_t>(run));
}

// gen-gt: writes <out>/gt/gt_demand.csv and <out>/gt/ground_truth.csv.
inline void run_gen_gt(const ExperimentConfig& cfg) {
    const Network net = load_network_file(cfg.network_path);
    const DemandVector gt_demand = generate_gt_demands(net, cfg.gt_seed);
    const GroundTruth gt = generate_gt(net, gt_demand, cfg.gt_n_reps, cfg.gt_seed, cfg.simulator);
    io::write_demand(cfg.output_dir + "/gt/gt_demand.csv", gt_demand);
    io::write_ground_truth(cfg.output_dir + "/gt/ground_truth.csv", gt, net);
}

// One calibration run; reads only the GroundTruth table (never gt_demand).
inline CalibrationTrace run_single_calibration(const Network& net, const GroundTruth& gt,
                                               const ExperimentConfig& cfg,
                                               const AlgorithmSpec& algo, double threshold,
                                               int run, DemandVector* initial_out) {
    const SegmentSet in_set = select_segments_by_congestion(gt, net, threshold);
    if (in_set.indices.empty())
        throw std::runtime_error("calibrate: empty in-sample set at threshold " +
                                 std::to_string(threshold));
    const Eigen::VectorXd weights = compute_weights(gt, net);
    const AssignmentMatrix a = build_assignment_matrix(net);
    const LossContext ctx = make_loss_context(net, a, gt, weights, in_set.indices);

    const std::uint64_t run_seed = derive_run_seed(cfg.master_seed, algo.name, threshold, run);
    rng::Stream init(rng::key_of(run_seed, rng::hash_str("x0")));
    DemandVector x0(net.num_od_pairs());
    for (int z = 0; z < net.num_od_pairs(); ++z) x0[z] = init.uniform(0.0, net.od_pairs[z].x_upper_vph);
    if (initial_out) *initial_out = x0;

    EvaluationBudget budget{cfg.budget, 0};
    if (algo.name == "metamodel") {
        OptimizerConfig oc;
        const auto& jc = algo.config;
        if (jc.contains("n_initial_random")) oc.n_initial_random = jc.at("n_initial_random").get<int>();
        if (jc.contains("inner_starts")) oc.inner_starts = jc.at("inner_starts").get<int>();
        if (jc.contains("inner_max_iters")) oc.inner_max_iters = jc.at("inner_max_iters").get<int>();
        if (jc.contains("inner_tol")) oc.inner_tol = jc.at("inner_tol").get<double>();
        if (jc.contains("exploration_prob")) oc.exploration_prob = jc.at("exploration_prob").get<double>();
        if (jc.contains("reps_per_eval")) oc.reps_per_eval = jc.at("reps_per_eval").get<int>();
        oc.seed = run_seed;
        FitConfig fc;
        if (jc.contains("ridge_weight")) fc.ridge_weight = jc.at("ridge_weight").get<double>();
        if (jc.contains("distance_weighting")) fc.distance_weighting = jc.at("distance_weighting").get<bool>();
        const Evaluator ev = make_simulation_evaluator(net, gt, weights, in_set.indices,
                                                       cfg.simulator, run_seed, oc.reps_per_eval);
        return calibrate_metamodel(ctx, x0, budget, oc, fc, ev);
    }
    SpsaConfig sc;
    const auto& jc = algo.config;
    if (jc.contains("a")) sc.a = jc.at("a").get<double>();
    if (jc.contains("c")) sc.c = jc.at("c").get<double>();
    if (jc.contains("A_stab")) sc.A_stab = jc.at("A_stab").get<double>();
    if (jc.contains("alpha")) sc.alpha = jc.at("alpha").get<double>();
    if (jc.contains("gamma")) sc.gamma = jc.at("gamma").get<double>();
    if (jc.contains("reps_per_eval")) sc.reps_per_eval = jc.at("reps_per_eval").get<int>();
    sc.seed = run_seed;
    const Evaluator ev = make_simulation_evaluator(net, gt, weights, in_set.indices, cfg.simulator,
                                                   run_seed, sc.reps_per_eval);
    return calibrate_spsa(net.upper_bounds(), x0, budget, sc, ev);
}

// calibrate: all (requested) algorithms x thresholds x runs, persisted per run.
inline void run_calibrate(const ExperimentConfig& cfg,
                          const std::optional<std::string>& only_algorithm = std::nullopt,
                          const std::optional<double>& only_threshold = std::nullopt) {
    const Network net = load_network_file(cfg.network_path);
    const GroundTruth gt = io::read_ground_truth(cfg.output_dir + "/gt/ground_truth.csv", net);

    for (const auto& algo : cfg.algorithms) {
        if (only_algorithm && *only_algorithm != algo.name) continue;
        for (double thr : cfg.thresholds) {
            if (only_threshold && std::abs(*only_threshold - thr) > 1e-12) continue;
            for (int run = 0; run < cfg.n_calibration_runs; ++run) {
                DemandVector x0;
                const CalibrationTrace trace =
                    run_single_calibration(net, gt, cfg, algo, thr, run, &x0);
                const std::string dir = detail::run_dir(cfg, algo.name, thr, run);
                io::write_demand(dir + "/initial_demand.csv", x0);
                io::write_demand(dir + "/final_demand.csv", trace.best_x);
                io::write_trace(dir + "/trace.csv", trace);
                if (algo.name == "metamodel") io::write_beta_snapshots(dir + "/beta.csv", trace);
            }
        }
    }
}

struct ReportRow {
    double threshold = 0.0;
    int n_in = 0;
    int n_out = 0;
    std::string algorithm;
    Metrics in_mean;
    std::optional<Metrics> out_mean;
};

// report: Table-1-style comparison rows plus scatter files per
// (algorithm, threshold). "initial" rows evaluate each run's initial demand.
inline std::vector<ReportRow> run_report(const ExperimentConfig& cfg) {
    const Network net = load_network_file(cfg.network_path);
    const GroundTruth gt = io::read_ground_truth(cfg.output_dir + "/gt/ground_truth.csv", net);

    std::vector<std::string> algo_names;
    for (const auto& a : cfg.algorithms) algo_names.push_back(a.name);
    algo_names.push_back("initial");
    std::sort(algo_names.begin(), algo_names.end());

    std::vector<ReportRow> rows;
    std::vector<double> thresholds = cfg.thresholds;
    std::sort(thresholds.begin(), thresholds.end());

    for (double thr : thresholds) {
        const SegmentSet in_set = select_segments_by_congestion(gt, net, thr);
        const SegmentSet out_set = complement_segment_set(in_set, net);
        for (const auto& name : algo_names) {
            ReportRow row;
            row.threshold = thr;
            row.n_in = static_cast<int>(in_set.indices.size());
            row.n_out = static_cast<int>(out_set.indices.size());
            row.algorithm = name;

            Metrics in_acc{0.0, 0.0}, out_acc{0.0, 0.0};
            std::vector<SimulationResult> run_results;
            // "initial" rows reuse the first listed algorithm's run directories
            const std::string src_algo = name == "initial" ? cfg.algorithms.front().name : name;
            const std::string file = name == "initial" ? "initial_demand.csv" : "final_demand.csv";
            for (int run = 0; run < cfg.n_calibration_runs; ++run) {
                const DemandVector x =
                    io::read_demand(detail::run_dir(cfg, src_algo, thr, run) + "/" + file);
                std::vector<std::uint64_t> seeds;
                for (int r = 0; r < cfg.final_eval_reps; ++r)
                    seeds.push_back(rng::key_of(cfg.master_seed, rng::hash_str("final-eval"),
                                                rng::hash_str(name), detail::threshold_key(thr),
                                                static_cast<std::uint64_t>(run),
                                                static_cast<std::uint64_t>(r)));
                const SimulationResult res = simulate_expected(net, x, seeds, cfg.simulator);
                const Metrics m_in = metrics_from_result(res, gt, in_set.indices);
                in_acc.nrmse_speed += m_in.nrmse_speed;
                in_acc.nrmse_count += m_in.nrmse_count;
                if (!out_set.indices.empty()) {
                    const Metrics m_out = metrics_from_result(res, gt, out_set.indices);
                    out_acc.nrmse_speed += m_out.nrmse_speed;
                    out_acc.nrmse_count += m_out.nrmse_count;
                }
                run_results.push_back(res);
            }
            const double inv = 1.0 / static_cast<double>(cfg.n_calibration_runs);
            row.in_mean = {in_acc.nrmse_speed * inv, in_acc.nrmse_count * inv};
            if (!out_set.indices.empty())
                row.out_mean = Metrics{out_acc.nrmse_speed * inv, out_acc.nrmse_count * inv};

            if (name != "initial") {
                const auto scatter = scatter_export(run_results, gt, net, in_set);
                io::write_scatter(cfg.output_dir + "/report/scatter_" + name + "_" +
                                      detail::threshold_tag(thr) + ".csv",
                                  scatter);
            }
            rows.push_back(std::move(row));
        }
    }

    auto out = io::open_out(cfg.output_dir + "/report/table.csv");
    out << "threshold,n_in,n_out,algorithm,in_nrmse_speed,in_nrmse_count,out_nrmse_speed,out_nrmse_count\n";
    for (const auto& r : rows) {
        out << io::fmt(r.threshold) << ',' << r.n_in << ',' << r.n_out << ',' << r.algorithm << ','
            << io::fmt(r.in_mean.nrmse_speed) << ',' << io::fmt(r.in_mean.nrmse_count) << ',';
        if (r.out_mean)
            out << io::fmt(r.out_mean->nrmse_speed) << ',' << io::fmt(r.out_mean->nrmse_count);
        else
            out << "-,-";
        out << '\n';
    }
    return rows;
}

}  // namespace odcal
