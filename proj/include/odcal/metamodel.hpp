#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "odcal/fd.hpp"
#include "odcal/network.hpp"
#include "odcal/simulator.hpp"

// The physics-informed metamodel: analytical loss f_A with its gradient,
// the surrogate m(x; beta) = beta[0]*f_A(x) + beta[1] + sum_z beta[z+1]*x_z,
// and weighted ridge least-squares fitting of beta from simulation samples.

namespace odcal {

struct MetamodelParams {
    Eigen::VectorXd beta;  // length |Z|+2
    int epoch = 0;
};

struct SamplePoint {
    DemandVector x;
    double loss = 0.0;  // simulated loss estimate
    double f_a = 0.0;   // analytical loss at x, cached
    std::vector<std::uint64_t> seeds_used;
};

class SampleSet {
  public:
    // Rejects near-duplicates (max-norm within 1e-9); returns false if rejected.
    bool insert(SamplePoint p) {
        if (contains(p.x)) return false;
        points_.push_back(std::move(p));
        return true;
    }

    bool contains(const DemandVector& x) const {
        for (const auto& q : points_)
            if ((q.x - x).lpNorm<Eigen::Infinity>() <= 1e-9) return true;
        return false;
    }

    const std::vector<SamplePoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

  private:
    std::vector<SamplePoint> points_;
};

struct FitConfig {
    double ridge_weight = 0.01;  // w0
    bool distance_weighting = true;
};

// Everything the analytical loss needs, frozen for one calibration problem.
struct LossContext {
    AssignmentMatrix A;
    Eigen::VectorXd gt_speed;       // per segment
    Eigen::VectorXd weights;        // per segment
    std::vector<int> segment_set;   // indices into segments (the in-sample set I)
    std::vector<FdParams> fd;       // per segment, analytical (unbiased) params
    DemandVector x_upper;
};

inline LossContext make_loss_context(const Network& net, const AssignmentMatrix& a,
                                     const GroundTruth& gt, const Eigen::VectorXd& weights,
                                     std::vector<int> segment_set) {
    LossContext ctx;
    ctx.A = a;
    ctx.gt_speed = gt.gt_speed;
    ctx.weights = weights;
    ctx.segment_set = std::move(segment_set);
    ctx.fd.reserve(net.segments.size());
    for (const auto& s : net.segments)
        ctx.fd.push_back({s.v_min_ms, s.v_max_ms, s.q_max_vph, s.alpha1, s.alpha2});
    ctx.x_upper = net.upper_bounds();
    return ctx;
}

// f_A(x) = (1/|I|) * sum_{i in I} w_i * (v_i^GT - v_i^a)^2
inline double analytical_loss(const LossContext& ctx, const DemandVector& x) {
    if (ctx.segment_set.empty()) throw std::invalid_argument("analytical_loss: empty segment set");
    const Eigen::VectorXd q = map_demand(ctx.A, x);
    double acc = 0.0;
    for (int i : ctx.segment_set) {
        const double r = ctx.gt_speed[i] - fd_speed(ctx.fd[static_cast<std::size_t>(i)], q[i]);
        acc += ctx.weights[i] * r * r;
    }
    return acc / static_cast<double>(ctx.segment_set.size());
}

// Chain rule through f_A, the FD, and q = A x.
inline Eigen::VectorXd analytical_loss_gradient(const LossContext& ctx, const DemandVector& x) {
    if (ctx.segment_set.empty())
        throw std::invalid_argument("analytical_loss_gradient: empty segment set");
    const Eigen::VectorXd q = map_demand(ctx.A, x);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(ctx.A.rows());
    const double scale = 2.0 / static_cast<double>(ctx.segment_set.size());
    for (int i : ctx.segment_set) {
        const auto& p = ctx.fd[static_cast<std::size_t>(i)];
        const double va = fd_speed(p, q[i]);
        r[i] = scale * ctx.weights[i] * (va - ctx.gt_speed[i]) * fd_speed_gradient(p, q[i]);
    }
    return ctx.A.transpose() * r;
}

inline double metamodel_predict(const MetamodelParams& params, const DemandVector& x,
                                double f_a_of_x) {
    if (params.beta.size() != x.size() + 2)
        throw std::invalid_argument("metamodel_predict: dimension mismatch");
    return params.beta[0] * f_a_of_x + params.beta[1] + params.beta.tail(x.size()).dot(x);
}

inline Eigen::VectorXd metamodel_gradient(const MetamodelParams& params, const LossContext& ctx,
                                          const DemandVector& x) {
    return params.beta[0] * analytical_loss_gradient(ctx, x) +
           params.beta.tail(x.size());
}

// Weighted ridge least squares toward the prior beta = (1, 0, ..., 0):
// minimize sum_j lambda_j (loss_j - m(x_j; beta))^2
//        + w0 ((beta_0 - 1)^2 + sum_{j>=1} beta_j^2).
inline MetamodelParams fit_metamodel(const SampleSet& samples, const DemandVector& x_current,
                                     const FitConfig& cfg) {
    if (samples.size() < 1) throw std::invalid_argument("fit_metamodel: needs >= 1 sample");
    const Eigen::Index dim = x_current.size() + 2;
    const auto& pts = samples.points();

    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd row(dim);
    for (const auto& p : pts) {
        const double lambda =
            cfg.distance_weighting ? 1.0 / (1.0 + (p.x - x_current).norm()) : 1.0;
        row[0] = p.f_a;
        row[1] = 1.0;
        row.tail(x_current.size()) = p.x;
        xtx.noalias() += lambda * row * row.transpose();
        xty.noalias() += lambda * p.loss * row;
    }
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(dim);
    prior[0] = 1.0;
    xtx.diagonal().array() += cfg.ridge_weight;
    xty += cfg.ridge_weight * prior;

    MetamodelParams out;
    out.beta = xtx.ldlt().solve(xty);
    return out;
}

// Eq.-(1)-style loss of a (replication-averaged) simulation result.
inline double simulated_loss(const SimulationResult& result, const GroundTruth& gt,
                             const Eigen::VectorXd& weights, const std::vector<int>& segment_set) {
    if (segment_set.empty()) throw std::invalid_argument("simulated_loss: empty segment set");
    double acc = 0.0;
    for (int i : segment_set) {
        if (i < 0 || i >= result.mean_speed.size())
            throw std::invalid_argument("simulated_loss: segment index " + std::to_string(i) +
                                        " missing from result");
        const double r = gt.gt_speed[i] - result.mean_speed[i];
        acc += weights[i] * r * r;
    }
    return acc / static_cast<double>(segment_set.size());
}

}  // namespace odcal
