#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "odcal/metamodel.hpp"
#include "odcal/rng.hpp"

// Outer simulation-optimization loops: the metamodel algorithm
// (fit -> solve inner problem -> simulate -> accept) and the SPSA benchmark,
// plus the bound-constrained projected-gradient inner solver.

namespace odcal {

struct EvaluationBudget {
    int max_vectors = 250;
    int consumed = 0;

    bool exhausted() const { return consumed >= max_vectors; }
    int remaining() const { return max_vectors - consumed; }
};

struct OptimizerConfig {
    int n_initial_random = 5;
    int inner_starts = 5;
    int inner_max_iters = 200;
    double inner_tol = 1e-6;  // projected-gradient max-norm
    double exploration_prob = 0.2;
    int reps_per_eval = 1;
    std::uint64_t seed = 0;
};

struct SpsaConfig {
    double a = 0.0;       // 0 => auto-scaled from a pilot gradient estimate
    double c = 0.0;       // 0 => 0.05 * mean(x_U)
    double A_stab = 0.0;  // 0 => 0.1 * (budget / 2)
    double alpha = 0.602;
    double gamma = 0.101;
    std::uint64_t seed = 0;
    int reps_per_eval = 1;
};

struct TraceEntry {
    int epoch = 0;
    int consumed = 0;
    DemandVector x;
    double loss = 0.0;
    bool accepted = false;
    double best_loss = 0.0;
    Eigen::VectorXd beta;  // empty for SPSA / initial samples
};

struct CalibrationTrace {
    std::vector<TraceEntry> entries;
    DemandVector best_x;
    double best_loss = std::numeric_limits<double>::infinity();
};

// Simulated-loss evaluator; the int argument is the evaluation index within
// the run and is used to derive fresh replication seeds.
using Evaluator = std::function<double(const DemandVector&, int)>;

inline Evaluator make_simulation_evaluator(const Network& net, const GroundTruth& gt,
                                           const Eigen::VectorXd& weights,
                                           const std::vector<int>& segment_set,
                                           const SimulatorConfig& sim_cfg, std::uint64_t run_seed,
                                           int reps_per_eval) {
    return [&net, &gt, weights, segment_set, sim_cfg, run_seed, reps_per_eval](
               const DemandVector& x, int eval_index) {
        std::vector<std::uint64_t> seeds;
        for (int r = 0; r < reps_per_eval; ++r)
            seeds.push_back(rng::key_of(run_seed, rng::hash_str("eval"),
                                        static_cast<std::uint64_t>(eval_index),
                                        static_cast<std::uint64_t>(r)));
        return simulated_loss(simulate_expected(net, x, seeds, sim_cfg), gt, weights, segment_set);
    };
}

namespace detail {

inline DemandVector project_box(const DemandVector& x, const DemandVector& upper) {
    return x.cwiseMax(0.0).cwiseMin(upper);
}

inline DemandVector random_point(rng::Stream& s, const DemandVector& upper) {
    DemandVector x(upper.size());
    for (Eigen::Index z = 0; z < upper.size(); ++z) x[z] = s.uniform(0.0, upper[z]);
    return x;
}

}  // namespace detail

// Projected gradient descent with Armijo backtracking on the metamodel
// surface, from each start; returns the terminal point with the lowest
// metamodel value. The accepted step is doubled as the next iteration's
// first trial so the search recovers from the conservative unit start.
inline DemandVector solve_inner(const MetamodelParams& params, const LossContext& ctx,
                                const std::vector<DemandVector>& starts,
                                const OptimizerConfig& cfg) {
    if (starts.empty()) throw std::invalid_argument("solve_inner: starts must be non-empty");
    const DemandVector& upper = ctx.x_upper;
    auto value = [&](const DemandVector& x) {
        return metamodel_predict(params, x, analytical_loss(ctx, x));
    };

    DemandVector best;
    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& start : starts) {
        DemandVector x = detail::project_box(start, upper);
        double fx = value(x);
        double step = 0.0;
        for (int it = 0; it < cfg.inner_max_iters; ++it) {
            const Eigen::VectorXd g = metamodel_gradient(params, ctx, x);
            if (it == 0) step = 1.0 / std::max(1.0, g.norm());
            const DemandVector pg = x - detail::project_box(x - g, upper);
            if (pg.lpNorm<Eigen::Infinity>() < cfg.inner_tol) break;

            double t = step;
            bool accepted = false;
            while (t > 1e-20) {
                const DemandVector xt = detail::project_box(x - t * g, upper);
                const double ft = value(xt);
                if (ft <= fx - 1e-4 * g.dot(x - xt)) {
                    x = xt;
                    fx = ft;
                    step = 2.0 * t;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
        }
        if (fx < best_val) {
            best_val = fx;
            best = x;
        }
    }
    return best;
}

// The metamodel SO loop. x0 is the provided initial point; n_initial_random
// additional uniform-random points seed the sample set. One budget unit per
// distinct demand vector submitted to the simulator.
inline CalibrationTrace calibrate_metamodel(const LossContext& ctx, const DemandVector& x0,
                                            EvaluationBudget& budget, const OptimizerConfig& opt_cfg,
                                            const FitConfig& fit_cfg, const Evaluator& evaluate) {
    if (budget.max_vectors < opt_cfg.n_initial_random + 1)
        throw std::invalid_argument("calibrate_metamodel: budget too small for initialization");

    rng::Stream outer(rng::key_of(opt_cfg.seed, rng::hash_str("outer")));
    CalibrationTrace trace;
    SampleSet samples;

    auto submit = [&](const DemandVector& x, int epoch, const Eigen::VectorXd& beta) {
        const double loss = evaluate(x, budget.consumed);
        ++budget.consumed;
        SamplePoint p;
        p.x = x;
        p.loss = loss;
        p.f_a = analytical_loss(ctx, x);
        samples.insert(p);
        const bool accepted = loss < trace.best_loss;
        if (accepted) {
            trace.best_loss = loss;
            trace.best_x = x;
        }
        trace.entries.push_back({epoch, budget.consumed, x, loss, accepted, trace.best_loss, beta});
    };

    // initialization: the provided point plus n_initial_random uniform draws
    submit(detail::project_box(x0, ctx.x_upper), 0, {});
    for (int j = 0; j < opt_cfg.n_initial_random && !budget.exhausted(); ++j) {
        rng::Stream s(rng::key_of(opt_cfg.seed, rng::hash_str("init"), static_cast<std::uint64_t>(j)));
        submit(detail::random_point(s, ctx.x_upper), 0, {});
    }

    int epoch = 0;
    while (!budget.exhausted()) {
        ++epoch;
        MetamodelParams params = fit_metamodel(samples, trace.best_x, fit_cfg);
        params.epoch = epoch;

        std::vector<DemandVector> starts{trace.best_x};
        for (int s = 1; s < opt_cfg.inner_starts; ++s) starts.push_back(detail::random_point(outer, ctx.x_upper));
        DemandVector cand = solve_inner(params, ctx, starts, opt_cfg);

        if (outer.next_double() < opt_cfg.exploration_prob)
            cand = detail::random_point(outer, ctx.x_upper);
        // duplicate candidates would degenerate the regression; retry randomly
        int retries = 0;
        while (samples.contains(cand) && retries++ < 100)
            cand = detail::random_point(outer, ctx.x_upper);

        submit(cand, epoch, params.beta);
    }
    return trace;
}

// Two-sided simultaneous-perturbation gradient estimate; consumes 2 budget
// units. delta components must be +/-1.
inline Eigen::VectorXd spsa_gradient_estimate(const DemandVector& x, double c_k,
                                              const Eigen::VectorXd& delta,
                                              const DemandVector& upper,
                                              EvaluationBudget& budget, const Evaluator& evaluate,
                                              double* loss_plus = nullptr,
                                              double* loss_minus = nullptr) {
    if (!(c_k > 0.0)) throw std::invalid_argument("spsa_gradient_estimate: c_k must be > 0");
    if (budget.remaining() < 2) throw std::runtime_error("spsa_gradient_estimate: budget exhausted");
    const DemandVector xp = detail::project_box(x + c_k * delta, upper);
    const DemandVector xm = detail::project_box(x - c_k * delta, upper);
    const double lp = evaluate(xp, budget.consumed);
    ++budget.consumed;
    const double lm = evaluate(xm, budget.consumed);
    ++budget.consumed;
    if (loss_plus) *loss_plus = lp;
    if (loss_minus) *loss_minus = lm;
    // delta_z^{-1} == delta_z for +/-1 components
    return (lp - lm) / (2.0 * c_k) * delta;
}

inline CalibrationTrace calibrate_spsa(const DemandVector& x_upper, const DemandVector& x0,
                                       EvaluationBudget& budget, const SpsaConfig& cfg,
                                       const Evaluator& evaluate) {
    if (budget.max_vectors - budget.consumed < 2)
        throw std::invalid_argument("calibrate_spsa: budget too small");

    rng::Stream stream(rng::key_of(cfg.seed, rng::hash_str("spsa")));
    CalibrationTrace trace;
    const double mean_upper = x_upper.mean();

    auto record = [&](const DemandVector& x, double loss, int epoch) {
        const bool accepted = loss < trace.best_loss;
        if (accepted) {
            trace.best_loss = loss;
            trace.best_x = x;
        }
        trace.entries.push_back({epoch, budget.consumed, x, loss, accepted, trace.best_loss, {}});
    };

    auto rademacher = [&]() {
        Eigen::VectorXd d(x_upper.size());
        for (Eigen::Index z = 0; z < d.size(); ++z) d[z] = stream.next_double() < 0.5 ? -1.0 : 1.0;
        return d;
    };

    const double c0 = cfg.c > 0.0 ? cfg.c : 0.05 * mean_upper;
    const double a_stab =
        cfg.A_stab > 0.0 ? cfg.A_stab : 0.1 * (static_cast<double>(budget.max_vectors) / 2.0);

    DemandVector x = detail::project_box(x0, x_upper);

    double a0 = cfg.a;
    if (!(a0 > 0.0)) {
        // pilot estimate so the first step moves ~2% of mean(x_U)
        const Eigen::VectorXd delta = rademacher();
        const DemandVector xp = detail::project_box(x + c0 * delta, x_upper);
        const double lp = evaluate(xp, budget.consumed);
        ++budget.consumed;
        record(xp, lp, 0);
        const DemandVector xm = detail::project_box(x - c0 * delta, x_upper);
        const double lm = evaluate(xm, budget.consumed);
        ++budget.consumed;
        record(xm, lm, 0);
        const Eigen::VectorXd g = (lp - lm) / (2.0 * c0) * delta;
        a0 = 0.02 * mean_upper * std::pow(a_stab + 1.0, cfg.alpha) /
             std::max(g.lpNorm<Eigen::Infinity>(), 1e-12);
    }

    int k = 0;
    while (budget.remaining() >= 1) {
        const double c_k = c0 / std::pow(static_cast<double>(k + 1), cfg.gamma);
        const double a_k = a0 / std::pow(a_stab + static_cast<double>(k + 1), cfg.alpha);
        const Eigen::VectorXd delta = rademacher();
        const DemandVector xp = detail::project_box(x + c_k * delta, x_upper);
        const double lp = evaluate(xp, budget.consumed);
        ++budget.consumed;
        record(xp, lp, k + 1);
        if (budget.remaining() < 1) break;
        const DemandVector xm = detail::project_box(x - c_k * delta, x_upper);
        const double lm = evaluate(xm, budget.consumed);
        ++budget.consumed;
        record(xm, lm, k + 1);
        const Eigen::VectorXd g = (lp - lm) / (2.0 * c_k) * delta;
        x = detail::project_box(x - a_k * g, x_upper);
        ++k;
    }
    return trace;
}

}  // namespace odcal
