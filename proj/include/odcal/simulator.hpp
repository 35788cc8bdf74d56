#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "odcal/fd.hpp"
#include "odcal/network.hpp"
#include "odcal/rng.hpp"

// Stochastic black-box traffic oracle. Maps a demand vector to noisy
// per-segment speeds and counts; deterministic given a seed, and
// intentionally biased relative to the analytical FD model through
// per-segment parameter perturbations and downstream spillback coupling.

namespace odcal {

struct SimulatorConfig {
    enum class DemandNoise { poisson, none };

    DemandNoise demand_noise = DemandNoise::poisson;
    double speed_noise_sigma = 0.05;   // lognormal sigma on speeds
    double param_bias_scale = 0.15;    // multiplicative perturbation of alpha1/alpha2
    double spillback_coupling = 0.2;   // fraction of downstream demand folded in
    std::uint64_t bias_seed = 0;

    static SimulatorConfig noise_free() {
        SimulatorConfig c;
        c.demand_noise = DemandNoise::none;
        c.speed_noise_sigma = 0.0;
        c.param_bias_scale = 0.0;
        c.spillback_coupling = 0.0;
        return c;
    }
};

struct SimulationResult {
    Eigen::VectorXd mean_speed;  // m/s per segment
    Eigen::VectorXd count;       // veh/h per segment
    std::vector<Eigen::VectorXd> rep_speeds;
    std::uint64_t seed = 0;
    DemandVector demand;
};

struct GroundTruth {
    Eigen::VectorXd gt_speed;
    Eigen::VectorXd gt_count;
    std::vector<Eigen::VectorXd> rep_speeds;
    DemandVector gt_demand;  // held out from calibration
    int n_replications = 0;
};

namespace detail {

inline void check_bounds(const Network& net, const DemandVector& x) {
    if (x.size() != net.num_od_pairs())
        throw std::invalid_argument("simulate: demand vector has wrong dimension");
    for (int z = 0; z < x.size(); ++z)
        if (!(x[z] >= 0.0 && x[z] <= net.od_pairs[z].x_upper_vph + 1e-9))
            throw std::invalid_argument("simulate: demand for od " + std::to_string(z + 1) +
                                        " outside [0, x_upper]");
}

}  // namespace detail

inline SimulationResult simulate(const Network& net, const DemandVector& x, std::uint64_t seed,
                                 const SimulatorConfig& cfg) {
    detail::check_bounds(net, x);
    const int n_seg = net.num_segments();

    // Realized per-segment demand plus, per segment, the downstream segment
    // on the route contributing the most flow (tie: lowest segment id).
    Eigen::VectorXd q_hat = Eigen::VectorXd::Zero(n_seg);
    struct Down {
        double flow = -1.0;
        int down = -1;
    };
    std::vector<Down> downstream(static_cast<std::size_t>(n_seg));

    for (int z = 0; z < net.num_od_pairs(); ++z) {
        const auto& od = net.od_pairs[z];
        std::vector<double> route_flow(od.routes.size(), 0.0);
        if (cfg.demand_noise == SimulatorConfig::DemandNoise::none) {
            for (std::size_t r = 0; r < od.routes.size(); ++r)
                route_flow[r] = x[z] * od.routes[r].probability;
        } else {
            rng::Stream s(rng::key_of(seed, rng::hash_str("demand"), static_cast<std::uint64_t>(z)));
            std::vector<double> probs(od.routes.size());
            for (std::size_t r = 0; r < od.routes.size(); ++r) probs[r] = od.routes[r].probability;
            const std::uint64_t d = s.poisson(x[z]);
            for (std::uint64_t veh = 0; veh < d; ++veh) route_flow[s.categorical(probs)] += 1.0;
        }
        for (std::size_t r = 0; r < od.routes.size(); ++r) {
            const double f = route_flow[r];
            const auto& segs = od.routes[r].segment_ids;
            for (std::size_t p = 0; p < segs.size(); ++p) {
                const int i = net.index_of(segs[p]);
                q_hat[i] += f;
                if (p + 1 < segs.size()) {
                    const int dn = net.index_of(segs[p + 1]);
                    auto& best = downstream[static_cast<std::size_t>(i)];
                    if (f > best.flow ||
                        (f == best.flow && best.down >= 0 &&
                         net.segments[static_cast<std::size_t>(dn)].id <
                             net.segments[static_cast<std::size_t>(best.down)].id)) {
                        best = {f, dn};
                    }
                }
            }
        }
    }

    SimulationResult res;
    res.mean_speed.resize(n_seg);
    res.count = q_hat;
    res.seed = seed;
    res.demand = x;

    for (int i = 0; i < n_seg; ++i) {
        const auto& seg = net.segments[static_cast<std::size_t>(i)];

        double q_eff = q_hat[i];
        const int dn = downstream[static_cast<std::size_t>(i)].down;
        if (dn >= 0) q_eff += cfg.spillback_coupling * q_hat[dn];
        q_eff = std::clamp(q_eff, 0.0, seg.q_max_vph);

        // per-segment parameter bias, drawn once from the bias seed
        rng::Stream bias(rng::key_of(cfg.bias_seed, rng::hash_str("bias"), static_cast<std::uint64_t>(i)));
        FdParams p{seg.v_min_ms, seg.v_max_ms, seg.q_max_vph,
                   seg.alpha1 * std::exp(cfg.param_bias_scale * bias.normal()),
                   seg.alpha2 * std::exp(cfg.param_bias_scale * bias.normal())};

        double v = fd_speed(p, q_eff);
        const double sigma = cfg.speed_noise_sigma;
        rng::Stream noise(rng::key_of(seed, rng::hash_str("speed"), static_cast<std::uint64_t>(i)));
        v *= std::exp(sigma * noise.normal() - 0.5 * sigma * sigma);
        res.mean_speed[i] = std::clamp(v, 0.0, seg.v_max_ms);
    }
    return res;
}

// Replication average over the given seeds, reduced in seed order.
inline SimulationResult simulate_expected(const Network& net, const DemandVector& x,
                                          const std::vector<std::uint64_t>& seeds,
                                          const SimulatorConfig& cfg) {
    if (seeds.empty()) throw std::invalid_argument("simulate_expected: empty seed list");
    SimulationResult acc;
    acc.mean_speed = Eigen::VectorXd::Zero(net.num_segments());
    acc.count = Eigen::VectorXd::Zero(net.num_segments());
    for (std::uint64_t s : seeds) {
        SimulationResult r = simulate(net, x, s, cfg);
        acc.count += r.count;
        acc.rep_speeds.push_back(std::move(r.mean_speed));
    }
    for (const auto& rs : acc.rep_speeds) acc.mean_speed += rs;
    const double inv = 1.0 / static_cast<double>(seeds.size());
    acc.mean_speed *= inv;
    acc.count *= inv;
    acc.seed = seeds.front();
    acc.demand = x;
    return acc;
}

inline GroundTruth generate_gt(const Network& net, const DemandVector& gt_demand, int n_reps,
                               std::uint64_t seed, const SimulatorConfig& cfg) {
    if (n_reps < 1) throw std::invalid_argument("generate_gt: n_reps must be >= 1");
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(n_reps));
    for (int r = 0; r < n_reps; ++r)
        seeds.push_back(rng::key_of(seed, rng::hash_str("gt-rep"), static_cast<std::uint64_t>(r)));
    SimulationResult res = simulate_expected(net, gt_demand, seeds, cfg);

    GroundTruth gt;
    gt.gt_speed = std::move(res.mean_speed);
    gt.gt_count = std::move(res.count);
    gt.rep_speeds = std::move(res.rep_speeds);
    gt.gt_demand = gt_demand;
    gt.n_replications = n_reps;
    return gt;
}

// Synthetic ground-truth demand: uniform on [0.3, 0.8] * x_upper per OD.
inline DemandVector generate_gt_demands(const Network& net, std::uint64_t seed) {
    DemandVector x(net.num_od_pairs());
    for (int z = 0; z < net.num_od_pairs(); ++z) {
        rng::Stream s(rng::key_of(seed, rng::hash_str("gt-demand"), static_cast<std::uint64_t>(z)));
        x[z] = s.uniform(0.3, 0.8) * net.od_pairs[z].x_upper_vph;
    }
    return x;
}

}  // namespace odcal
