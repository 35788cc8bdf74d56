#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "odcal/network.hpp"
#include "odcal/rng.hpp"
#include "odcal/simulator.hpp"

// Metrics (nRMSE, segment weights), congestion-stratified segment selection
// and in-/out-of-sample evaluation.

namespace odcal {

struct SegmentSet {
    std::vector<int> indices;  // into Network::segments, ordered by segment id
    std::string label;
};

struct Metrics {
    double nrmse_speed = 0.0;
    double nrmse_count = 0.0;
};

struct MetricsReport {
    Metrics in_sample;
    std::optional<Metrics> out_of_sample;  // absent when the out-set is empty
    int n_runs = 1;
    std::vector<Metrics> per_run_in;
    std::vector<Metrics> per_run_out;
};

// min{v/v_max, 1 - v/v_max}; v_gt clamped into [0, v_max] first.
inline double segment_weight(double v_gt, double v_max) {
    if (!(v_max > 0.0)) throw std::invalid_argument("segment_weight: v_max must be > 0");
    const double ratio = std::clamp(v_gt, 0.0, v_max) / v_max;
    return std::min(ratio, 1.0 - ratio);
}

inline Eigen::VectorXd compute_weights(const GroundTruth& gt, const Network& net) {
    Eigen::VectorXd w(net.num_segments());
    for (int i = 0; i < net.num_segments(); ++i)
        w[i] = segment_weight(gt.gt_speed[i], net.segments[static_cast<std::size_t>(i)].v_max_ms);
    return w;
}

// RMSE normalized by the ground-truth mean.
inline double nrmse(const Eigen::VectorXd& sim, const Eigen::VectorXd& gt) {
    if (sim.size() == 0 || sim.size() != gt.size())
        throw std::invalid_argument("nrmse: vectors must be non-empty and of equal length");
    const double mean = gt.mean();
    if (!(mean > 0.0)) throw std::invalid_argument("nrmse: GT mean must be > 0");
    const double mse = (sim - gt).squaredNorm() / static_cast<double>(sim.size());
    return std::sqrt(mse) / mean;
}

// Routed segments with gt_speed / v_max <= threshold (gt_speed clamped to v_max).
inline SegmentSet select_segments_by_congestion(const GroundTruth& gt, const Network& net,
                                                double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw std::invalid_argument("select_segments_by_congestion: threshold must be in (0,1]");
    const auto routed = net.routed_segments();
    std::vector<int> idx;
    for (int i = 0; i < net.num_segments(); ++i) {
        if (!routed[static_cast<std::size_t>(i)]) continue;
        const double vmax = net.segments[static_cast<std::size_t>(i)].v_max_ms;
        const double ratio = std::clamp(gt.gt_speed[i], 0.0, vmax) / vmax;
        if (ratio <= threshold) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return net.segments[static_cast<std::size_t>(a)].id < net.segments[static_cast<std::size_t>(b)].id;
    });
    char label[32];
    std::snprintf(label, sizeof label, "congested-%g", threshold);
    return {std::move(idx), label};
}

// All routed GT segments not in the given in-sample set.
inline SegmentSet complement_segment_set(const SegmentSet& in_set, const Network& net) {
    const auto routed = net.routed_segments();
    std::vector<bool> in(net.segments.size(), false);
    for (int i : in_set.indices) in[static_cast<std::size_t>(i)] = true;
    std::vector<int> idx;
    for (int i = 0; i < net.num_segments(); ++i)
        if (routed[static_cast<std::size_t>(i)] && !in[static_cast<std::size_t>(i)]) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return net.segments[static_cast<std::size_t>(a)].id < net.segments[static_cast<std::size_t>(b)].id;
    });
    return {std::move(idx), "out-of-sample"};
}

namespace detail {

inline Eigen::VectorXd restrict_to(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
    return out;
}

}  // namespace detail

inline Metrics metrics_from_result(const SimulationResult& res, const GroundTruth& gt,
                                   const std::vector<int>& idx) {
    Metrics m;
    m.nrmse_speed = nrmse(detail::restrict_to(res.mean_speed, idx), detail::restrict_to(gt.gt_speed, idx));
    m.nrmse_count = nrmse(detail::restrict_to(res.count, idx), detail::restrict_to(gt.gt_count, idx));
    return m;
}

// Fresh-replication evaluation of a demand vector (outside any budget).
inline MetricsReport evaluate_demands(const Network& net, const DemandVector& x,
                                      const GroundTruth& gt, const SegmentSet& in_set,
                                      const SegmentSet& out_set, int n_reps, std::uint64_t seed,
                                      const SimulatorConfig& cfg) {
    if (in_set.indices.empty()) throw std::invalid_argument("evaluate_demands: empty in-sample set");
    if (n_reps < 1) throw std::invalid_argument("evaluate_demands: n_reps must be >= 1");
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < n_reps; ++r)
        seeds.push_back(rng::key_of(seed, rng::hash_str("final-eval"), static_cast<std::uint64_t>(r)));
    const SimulationResult res = simulate_expected(net, x, seeds, cfg);

    MetricsReport rep;
    rep.in_sample = metrics_from_result(res, gt, in_set.indices);
    rep.per_run_in = {rep.in_sample};
    if (!out_set.indices.empty()) {
        rep.out_of_sample = metrics_from_result(res, gt, out_set.indices);
        rep.per_run_out = {*rep.out_of_sample};
    }
    return rep;
}

struct ScatterRow {
    std::string segment_id;
    double gt_speed = 0.0;
    double sim_speed_mean = 0.0;
    double sim_speed_std = 0.0;  // sample std (n-1); 0 for a single run
};

inline std::vector<ScatterRow> scatter_export(const std::vector<SimulationResult>& runs,
                                              const GroundTruth& gt, const Network& net,
                                              const SegmentSet& segment_set) {
    if (runs.empty()) throw std::invalid_argument("scatter_export: needs >= 1 run");
    std::vector<ScatterRow> rows;
    rows.reserve(segment_set.indices.size());
    const double n = static_cast<double>(runs.size());
    for (int i : segment_set.indices) {
        double mean = 0.0;
        for (const auto& r : runs) mean += r.mean_speed[i];
        mean /= n;
        double var = 0.0;
        if (runs.size() > 1) {
            for (const auto& r : runs) var += (r.mean_speed[i] - mean) * (r.mean_speed[i] - mean);
            var /= (n - 1.0);
        }
        rows.push_back({net.segments[static_cast<std::size_t>(i)].id, gt.gt_speed[i], mean,
                        std::sqrt(var)});
    }
    return rows;
}

}  // namespace odcal
