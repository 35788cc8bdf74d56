#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

// Urban fundamental diagram: segment speed as a function of segment demand.
//
//   v(q) = v_min + (v_max - v_min) * (1 - (q/q_max)^alpha1)^alpha2
//
// Demands are clamped into [0, q_max]; the analytic derivative is evaluated
// at a point pulled strictly inside (0, q_max) so it stays finite for any
// positive alpha1/alpha2.

namespace odcal {

struct FdParams {
    double v_min = 1.0;   // m/s
    double v_max = 15.0;  // m/s
    double q_max = 1800;  // veh/h
    double alpha1 = 2.0;
    double alpha2 = 1.0;
};

struct FdSample {
    double q = 0.0;  // veh/h
    double v = 0.0;  // m/s
};

inline double fd_speed(const FdParams& p, double q) {
    const double qc = std::clamp(q, 0.0, p.q_max);
    const double u = qc / p.q_max;
    const double v = p.v_min + (p.v_max - p.v_min) * std::pow(1.0 - std::pow(u, p.alpha1), p.alpha2);
    return std::clamp(v, p.v_min, p.v_max);
}

// dv/dq, evaluated at clamp(q, eps*q_max, (1-eps)*q_max); always <= 0.
inline double fd_speed_gradient(const FdParams& p, double q) {
    constexpr double eps = 1e-6;
    const double qc = std::clamp(q, eps * p.q_max, (1.0 - eps) * p.q_max);
    const double u = qc / p.q_max;
    const double ua1 = std::pow(u, p.alpha1);
    return -(p.v_max - p.v_min) * p.alpha1 * p.alpha2 / p.q_max *
           std::pow(u, p.alpha1 - 1.0) * std::pow(1.0 - ua1, p.alpha2 - 1.0);
}

struct FdFixedParams {
    double v_min;
    double v_max;
    double q_max;
};

namespace detail {

inline double fd_fit_objective(const FdFixedParams& fixed, double a1, double a2,
                               const std::vector<FdSample>& samples) {
    FdParams p{fixed.v_min, fixed.v_max, fixed.q_max, a1, a2};
    double sse = 0.0;
    for (const auto& s : samples) {
        const double r = s.v - fd_speed(p, s.q);
        sse += r * r;
    }
    return sse;
}

}  // namespace detail

// Least-squares fit of (alpha1, alpha2) on the box [0.1, 10]^2 with v_min,
// v_max, q_max held fixed. Multi-start compass search (in log coordinates)
// seeded from a 5x5 log-spaced grid.
inline std::pair<double, double> fit_fd_params(const std::vector<FdSample>& samples,
                                               const FdFixedParams& fixed) {
    if (samples.size() < 2)
        throw std::invalid_argument("fit_fd_params: insufficient-samples (need >= 2)");
    bool distinct = false;
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].q != samples[0].q) distinct = true;
    if (!distinct) throw std::invalid_argument("fit_fd_params: degenerate samples (all q equal)");

    const double lo = std::log(0.1), hi = std::log(10.0);
    auto obj_log = [&](double la1, double la2) {
        return detail::fd_fit_objective(fixed, std::exp(la1), std::exp(la2), samples);
    };

    double best_la1 = 0.0, best_la2 = 0.0, best_obj = std::numeric_limits<double>::infinity();
    for (int gi = 0; gi < 5; ++gi) {
        for (int gj = 0; gj < 5; ++gj) {
            double la1 = lo + (hi - lo) * gi / 4.0;
            double la2 = lo + (hi - lo) * gj / 4.0;
            double f = obj_log(la1, la2);
            // compass search with shrinking step
            double step = (hi - lo) / 4.0;
            while (step > 1e-8) {
                bool moved = false;
                const double cand[4][2] = {{la1 + step, la2}, {la1 - step, la2},
                                           {la1, la2 + step}, {la1, la2 - step}};
                for (const auto& c : cand) {
                    const double c1 = std::clamp(c[0], lo, hi);
                    const double c2 = std::clamp(c[1], lo, hi);
                    const double fc = obj_log(c1, c2);
                    if (fc < f) {
                        la1 = c1;
                        la2 = c2;
                        f = fc;
                        moved = true;
                        break;
                    }
                }
                if (!moved) step *= 0.5;
            }
            if (f < best_obj) {
                best_obj = f;
                best_la1 = la1;
                best_la2 = la2;
            }
        }
    }
    return {std::exp(best_la1), std::exp(best_la2)};
}

}  // namespace odcal
