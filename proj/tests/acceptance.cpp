// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Criteria 4-6 share a single stochastic harness run (the experiment
// pipeline on the demo network); criterion 7 audits that harness's
// artifacts plus a byte-identity rerun on a reduced config.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "odcal/experiment.hpp"
#include "odcal/generator.hpp"
#include "odcal/io.hpp"

using namespace odcal;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Timer {
  public:
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

void report(int id, const char* name, bool ok, const std::string& detail) {
    std::printf("%s  criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt1(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1
void criterion_fd_properties() {
    Timer t;
    bool ok = true;
    std::string why;
    rng::Stream s(rng::key_of(101, rng::hash_str("acc-fd")));
    double worst_rel = 0.0;
    for (int draw = 0; draw < 1000 && ok; ++draw) {
        FdParams p;
        p.v_min = s.uniform(0.0, 4.0);
        p.v_max = p.v_min + s.uniform(2.0, 20.0);
        p.q_max = s.uniform(500.0, 3000.0);
        p.alpha1 = s.uniform(0.6, 4.0);
        p.alpha2 = s.uniform(0.6, 4.0);

        if (fd_speed(p, 0.0) != p.v_max || fd_speed(p, p.q_max) != p.v_min) {
            ok = false;
            why = "boundary values not exact";
            break;
        }
        double prev = p.v_max;
        for (int k = 0; k <= 100; ++k) {
            const double v = fd_speed(p, p.q_max * k / 100.0);
            if (v < p.v_min || v > p.v_max || v > prev + 1e-12) {
                ok = false;
                why = "range/monotonicity violated on the q grid";
                break;
            }
            prev = v;
        }
        for (int k = 0; k < 100 && ok; ++k) {
            const double q = p.q_max * s.uniform(0.05, 0.95);
            const double h = 1e-5 * p.q_max;
            const double fd = (fd_speed(p, q + h) - fd_speed(p, q - h)) / (2.0 * h);
            const double rel = std::abs(fd_speed_gradient(p, q) - fd) / std::max(std::abs(fd), 1e-12);
            worst_rel = std::max(worst_rel, rel);
            if (rel > 1e-6) {
                ok = false;
                why = "gradient mismatch, rel=" + fmt1("%.3e", rel);
            }
        }
    }
    const double dt = t.seconds();
    if (ok && dt >= 5.0) {
        ok = false;
        why = "over the 5 s runtime limit";
    }
    if (ok)
        why = "1000 draws, worst gradient rel err " + fmt1("%.2e", worst_rel) + ", " +
              fmt1("%.1f", dt) + " s";
    report(1, "fundamental-diagram properties", ok, why);
}

// ---------------------------------------------------------------- criterion 2
void criterion_loss_gradient(const Network& net) {
    Timer t;
    const AssignmentMatrix a = build_assignment_matrix(net);
    const DemandVector gt_demand = generate_gt_demands(net, 7);
    const GroundTruth gt = generate_gt(net, gt_demand, 1, 7, SimulatorConfig::noise_free());
    const Eigen::VectorXd weights = compute_weights(gt, net);
    std::vector<int> in_set;
    const auto routed = net.routed_segments();
    for (int i = 0; i < net.num_segments(); ++i)
        if (routed[static_cast<std::size_t>(i)]) in_set.push_back(i);
    const LossContext ctx = make_loss_context(net, a, gt, weights, in_set);

    rng::Stream s(rng::key_of(102, rng::hash_str("acc-grad")));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        // feasible draws kept a stencil-width inside the box: the loss has a
        // kink where a demand component reaches 0
        DemandVector x(net.num_od_pairs());
        for (int z = 0; z < net.num_od_pairs(); ++z) {
            const double u = net.od_pairs[static_cast<std::size_t>(z)].x_upper_vph;
            x[z] = s.uniform(1e-3 * u, u - 1e-3 * u);
        }
        const Eigen::VectorXd g = analytical_loss_gradient(ctx, x);
        Eigen::VectorXd fd(x.size());
        for (int z = 0; z < x.size(); ++z) {
            const double h = 1e-3 * net.od_pairs[static_cast<std::size_t>(z)].x_upper_vph;
            DemandVector xp = x, xm = x;
            xp[z] += h;
            xm[z] -= h;
            fd[z] = (analytical_loss(ctx, xp) - analytical_loss(ctx, xm)) / (2.0 * h);
        }
        worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / fd.lpNorm<Eigen::Infinity>());
    }
    const double dt = t.seconds();
    bool ok = worst < 1e-5 && dt < 30.0;
    report(2, "analytical-loss gradient", ok,
           "worst rel max-norm err " + fmt1("%.2e", worst) + " over 100 x, " + fmt1("%.1f", dt) +
               " s");
}

// ---------------------------------------------------------------- criterion 3
void criterion_identifiability(const Network& net) {
    Timer t;
    const SimulatorConfig sim_cfg = SimulatorConfig::noise_free();
    const AssignmentMatrix a = build_assignment_matrix(net);
    bool ok = true;
    std::string why;
    double worst_nrmse = 0.0;
    for (std::uint64_t run = 0; run < 3; ++run) {
        const DemandVector gt_demand = generate_gt_demands(net, 7);
        const GroundTruth gt = generate_gt(net, gt_demand, 1, 7, sim_cfg);
        const Eigen::VectorXd weights = compute_weights(gt, net);
        const SegmentSet in_set = select_segments_by_congestion(gt, net, 1.0);
        const LossContext ctx = make_loss_context(net, a, gt, weights, in_set.indices);

        OptimizerConfig oc;
        oc.seed = rng::key_of(103, rng::hash_str("acc-ident"), run);
        const Evaluator ev = make_simulation_evaluator(net, gt, weights, in_set.indices, sim_cfg,
                                                       oc.seed, 1);
        rng::Stream init(rng::key_of(oc.seed, rng::hash_str("x0")));
        DemandVector x0(net.num_od_pairs());
        for (int z = 0; z < net.num_od_pairs(); ++z)
            x0[z] = init.uniform(0.0, net.od_pairs[static_cast<std::size_t>(z)].x_upper_vph);

        EvaluationBudget budget{100, 0};
        const CalibrationTrace trace = calibrate_metamodel(ctx, x0, budget, oc, FitConfig{}, ev);
        const SimulationResult res = simulate(net, trace.best_x, 1, sim_cfg);
        const double err = nrmse(detail::restrict_to(res.mean_speed, in_set.indices),
                                 detail::restrict_to(gt.gt_speed, in_set.indices));
        worst_nrmse = std::max(worst_nrmse, err);
        if (!(err < 0.02)) {
            ok = false;
            why = "seed " + std::to_string(run) + " ended at speed nRMSE " + fmt1("%.4f", err);
        }
    }
    const double dt = t.seconds();
    if (ok && dt >= 120.0) {
        ok = false;
        why = "over the 2 min runtime limit";
    }
    if (ok)
        why = "3/3 seeds below 0.02 (worst " + fmt1("%.4f", worst_nrmse) + ") in 100 evals, " +
              fmt1("%.1f", dt) + " s";
    report(3, "noise-free identifiability", ok, why);
}

// ----------------------------------------------------- criteria 4-6 (harness)
struct HarnessResult {
    std::vector<ReportRow> rows;
    ExperimentConfig cfg;
    double seconds = 0.0;
};

const ReportRow& find_row(const std::vector<ReportRow>& rows, double thr, const std::string& algo) {
    for (const auto& r : rows)
        if (std::abs(r.threshold - thr) < 1e-12 && r.algorithm == algo) return r;
    throw std::runtime_error("missing report row " + algo + " @ " + std::to_string(thr));
}

HarnessResult run_harness(const Network& net, const fs::path& dir) {
    Timer t;
    fs::remove_all(dir);
    {
        auto out = io::open_out((dir / "net.json").string());
        out << network_to_json(net).dump(2) << '\n';
    }
    ExperimentConfig cfg;
    cfg.network_path = (dir / "net.json").string();
    cfg.output_dir = (dir / "out").string();
    cfg.gt_seed = 7;
    cfg.gt_n_reps = 10;
    cfg.budget = 250;
    cfg.n_calibration_runs = 3;
    cfg.thresholds = {0.8, 0.9, 1.0};
    cfg.final_eval_reps = 5;
    cfg.master_seed = 1;

    run_gen_gt(cfg);
    run_calibrate(cfg);
    HarnessResult res;
    res.rows = run_report(cfg);
    res.cfg = cfg;
    res.seconds = t.seconds();
    return res;
}

void criterion_beats_spsa(const HarnessResult& h) {
    bool ok = true;
    double sum_impr = 0.0;
    std::string detail;
    for (double thr : h.cfg.thresholds) {
        const double mm = find_row(h.rows, thr, "metamodel").in_mean.nrmse_speed;
        const double sp = find_row(h.rows, thr, "spsa").in_mean.nrmse_speed;
        if (!(mm < sp)) ok = false;
        sum_impr += (sp - mm) / sp;
        detail += fmt1("%.2f", thr) + ":" + fmt1("%.3f", mm) + "<" + fmt1("%.3f", sp) + " ";
    }
    const double mean_impr = sum_impr / static_cast<double>(h.cfg.thresholds.size());
    if (!(mean_impr >= 0.30)) ok = false;
    if (h.seconds >= 600.0) ok = false;
    report(4, "metamodel beats SPSA", ok,
           detail + "mean improvement " + fmt1("%.1f", 100.0 * mean_impr) + "%, harness " +
               fmt1("%.0f", h.seconds) + " s");
}

void criterion_beats_initial(const HarnessResult& h) {
    bool ok = true;
    std::string detail;
    for (double thr : h.cfg.thresholds) {
        const double mm = find_row(h.rows, thr, "metamodel").in_mean.nrmse_speed;
        const double ini = find_row(h.rows, thr, "initial").in_mean.nrmse_speed;
        const double red = (ini - mm) / ini;
        if (!(red >= 0.40)) ok = false;
        detail += fmt1("%.2f", thr) + ":" + fmt1("%.1f", 100.0 * red) + "% ";
    }
    report(5, "improvement over initial demands", ok, detail + "(required >= 40% each)");
}

void criterion_value_of_data(const HarnessResult& h) {
    const double full = find_row(h.rows, 1.0, "metamodel").in_mean.nrmse_count;
    const double congested = find_row(h.rows, 0.8, "metamodel").in_mean.nrmse_count;
    report(6, "value-of-data trend", full <= congested,
           "count nRMSE full set " + fmt1("%.3f", full) + " <= congested subset " +
               fmt1("%.3f", congested));
}

// ---------------------------------------------------------------- criterion 7
std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_protocol(const Network& net, const HarnessResult& h, const fs::path& tmp) {
    bool ok = true;
    std::string why;

    // every trace consumes exactly the 250-vector budget; every candidate is feasible
    const DemandVector upper = net.upper_bounds();
    for (const auto& algo : {"metamodel", "spsa"}) {
        for (double thr : h.cfg.thresholds) {
            for (int run = 0; run < h.cfg.n_calibration_runs && ok; ++run) {
                const std::string path =
                    detail::run_dir(h.cfg, algo, thr, run) + "/trace.csv";
                std::ifstream in(path);
                std::string line;
                std::getline(in, line);  // header
                int rows = 0;
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    ++rows;
                    const auto cells = io::split_csv(line);
                    for (Eigen::Index z = 0; z < upper.size(); ++z) {
                        const double v = std::stod(cells[5 + static_cast<std::size_t>(z)]);
                        if (v < 0.0 || v > upper[z] + 1e-9) {
                            ok = false;
                            why = "infeasible candidate in " + path;
                        }
                    }
                }
                if (rows != h.cfg.budget) {
                    ok = false;
                    why = path + " has " + std::to_string(rows) + " evaluations, expected " +
                          std::to_string(h.cfg.budget);
                }
            }
        }
    }

    // empty out-of-sample sets are printed as "-"
    if (ok) {
        bool dash = false;
        std::stringstream table(slurp(h.cfg.output_dir + "/report/table.csv"));
        std::string line;
        while (std::getline(table, line))
            if (line.find("-,-") != std::string::npos) dash = true;
        const ReportRow& full = find_row(h.rows, 1.0, "metamodel");
        if (!dash || full.n_out != 0 || full.out_mean.has_value()) {
            ok = false;
            why = "empty out-of-sample set not rendered as '-'";
        }
    }

    // reruns under a fixed config are byte-identical (reduced budget)
    if (ok) {
        ExperimentConfig small = h.cfg;
        small.budget = 30;
        small.n_calibration_runs = 2;
        small.thresholds = {0.9, 1.0};
        std::string first;
        for (int rep = 0; rep < 2; ++rep) {
            small.output_dir = (tmp / ("rerun" + std::to_string(rep))).string();
            run_gen_gt(small);
            run_calibrate(small);
            run_report(small);
            const std::string blob =
                slurp(small.output_dir + "/report/table.csv") +
                slurp(detail::run_dir(small, "metamodel", 0.9, 1) + "/trace.csv") +
                slurp(detail::run_dir(small, "spsa", 1.0, 0) + "/trace.csv") +
                slurp(small.output_dir + "/gt/ground_truth.csv");
            if (rep == 0)
                first = blob;
            else if (blob != first) {
                ok = false;
                why = "rerun under a fixed config is not byte-identical";
            }
        }
    }

    if (ok)
        why = "all traces consume exactly " + std::to_string(h.cfg.budget) +
              " feasible evaluations; '-' marks present; rerun byte-identical";
    report(7, "protocol exactness", ok, why);
}

// ---------------------------------------------------------------- criterion 8
void criterion_spsa_sanity() {
    const Eigen::Index dim = 10;
    const DemandVector upper = DemandVector::Constant(dim, 1000.0);
    const DemandVector target = DemandVector::Constant(dim, 750.0);
    const Evaluator quad = [&](const DemandVector& x, int) {
        return (x - target).squaredNorm() / static_cast<double>(dim);
    };
    SpsaConfig cfg;
    cfg.c = 5.0;
    cfg.a = 4.0;
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        cfg.seed = seed;
        EvaluationBudget budget{200, 0};
        const CalibrationTrace trace =
            calibrate_spsa(upper, DemandVector::Constant(dim, 300.0), budget, cfg, quad);
        const double err =
            (trace.best_x - target).lpNorm<Eigen::Infinity>() / target.lpNorm<Eigen::Infinity>();
        worst = std::max(worst, err);
        if (!(err <= 0.05)) ok = false;
    }
    report(8, "SPSA sanity on the quadratic hook", ok,
           "worst relative max-norm distance to the optimum " + fmt1("%.3f", worst) +
               " (limit 0.05), 3 seeds");
}

// ---------------------------------------------------------------- criterion 9
void criterion_metric_units() {
    bool ok = true;
    std::string why;
    if (nrmse(Eigen::Vector2d(8.0, 12.0), Eigen::Vector2d(10.0, 10.0)) != 0.2) {
        ok = false;
        why = "nrmse([8,12],[10,10]) != 0.2";
    }
    if (segment_weight(3.0, 15.0) != 0.2) {
        ok = false;
        why = "segment_weight(3,15) != 0.2";
    }
    MetamodelParams pure;
    pure.beta = Eigen::Vector3d(1.0, 0.0, 0.0);
    DemandVector x(1);
    x << 4.0;
    if (metamodel_predict(pure, x, 0.37) != 0.37) {
        ok = false;
        why = "metamodel_predict identity broken";
    }
    if (ok) why = "nrmse, segment_weight and metamodel_predict identities hold exactly";
    report(9, "metric units", ok, why);
}

}  // namespace

int main() {
    const Network net = generate_network(GeneratorConfig::demo());
    const fs::path tmp = fs::temp_directory_path() / "odcal_acceptance";

    criterion_fd_properties();
    criterion_loss_gradient(net);
    criterion_identifiability(net);
    const HarnessResult harness = run_harness(net, tmp);
    criterion_beats_spsa(harness);
    criterion_beats_initial(harness);
    criterion_value_of_data(harness);
    criterion_protocol(net, harness, tmp);
    criterion_spsa_sanity();
    criterion_metric_units();

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 9 criteria passed\n");
    return 0;
}
