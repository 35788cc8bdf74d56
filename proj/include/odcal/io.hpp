#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "odcal/eval.hpp"
#include "odcal/network.hpp"
#include "odcal/simulator.hpp"
#include "odcal/solvers.hpp"

// Comma-separated persistence for demand vectors, ground truth, traces and
// reports. Doubles are written with %.17g so every file round-trips
// losslessly and reruns are byte-identical.

namespace odcal::io {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

inline void write_demand(const std::string& path, const DemandVector& x) {
    auto out = open_out(path);
    out << "od_id,demand_vph\n";
    for (Eigen::Index z = 0; z < x.size(); ++z) out << (z + 1) << ',' << fmt(x[z]) << '\n';
}

inline DemandVector read_demand(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> vals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 2) throw std::runtime_error("malformed demand file: " + path);
        vals.push_back(std::stod(f[1]));
    }
    DemandVector x(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) x[static_cast<Eigen::Index>(i)] = vals[i];
    return x;
}

// GroundTruth table; gt_demand is deliberately not part of this file.
inline void write_ground_truth(const std::string& path, const GroundTruth& gt, const Network& net) {
    auto out = open_out(path);
    out << "segment_id,gt_speed_ms,gt_count_vph";
    for (int r = 1; r <= gt.n_replications; ++r) out << ",rep_" << r << "_speed";
    out << '\n';
    for (int i = 0; i < net.num_segments(); ++i) {
        out << net.segments[static_cast<std::size_t>(i)].id << ',' << fmt(gt.gt_speed[i]) << ','
            << fmt(gt.gt_count[i]);
        for (const auto& rep : gt.rep_speeds) out << ',' << fmt(rep[i]);
        out << '\n';
    }
}

inline GroundTruth read_ground_truth(const std::string& path, const Network& net) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv(line);
    if (header.size() < 3) throw std::runtime_error("malformed ground-truth file: " + path);
    const int n_reps = static_cast<int>(header.size()) - 3;

    GroundTruth gt;
    gt.n_replications = n_reps;
    gt.gt_speed = Eigen::VectorXd::Zero(net.num_segments());
    gt.gt_count = Eigen::VectorXd::Zero(net.num_segments());
    gt.rep_speeds.assign(static_cast<std::size_t>(n_reps),
                         Eigen::VectorXd::Zero(net.num_segments()));
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (static_cast<int>(f.size()) != 3 + n_reps)
            throw std::runtime_error("malformed ground-truth row in " + path);
        const int i = net.index_of(f[0]);
        if (i < 0) throw std::runtime_error("ground-truth file references unknown segment " + f[0]);
        gt.gt_speed[i] = std::stod(f[1]);
        gt.gt_count[i] = std::stod(f[2]);
        for (int r = 0; r < n_reps; ++r) gt.rep_speeds[static_cast<std::size_t>(r)][i] = std::stod(f[3 + r]);
        ++rows;
    }
    if (rows != net.num_segments())
        throw std::runtime_error("ground-truth file covers " + std::to_string(rows) + " of " +
                                 std::to_string(net.num_segments()) + " segments");
    return gt;
}

inline void write_trace(const std::string& path, const CalibrationTrace& trace) {
    auto out = open_out(path);
    const Eigen::Index dim = trace.entries.empty() ? 0 : trace.entries.front().x.size();
    out << "epoch,consumed,candidate_loss,accepted,best_loss";
    for (Eigen::Index z = 1; z <= dim; ++z) out << ",x_" << z;
    out << '\n';
    for (const auto& e : trace.entries) {
        out << e.epoch << ',' << e.consumed << ',' << fmt(e.loss) << ',' << (e.accepted ? 1 : 0)
            << ',' << fmt(e.best_loss);
        for (Eigen::Index z = 0; z < e.x.size(); ++z) out << ',' << fmt(e.x[z]);
        out << '\n';
    }
}

inline void write_beta_snapshots(const std::string& path, const CalibrationTrace& trace) {
    auto out = open_out(path);
    Eigen::Index dim = 0;
    for (const auto& e : trace.entries)
        if (e.beta.size() > 0) dim = e.beta.size();
    out << "epoch";
    for (Eigen::Index j = 0; j < dim; ++j) out << ",beta_" << j;
    out << '\n';
    for (const auto& e : trace.entries) {
        if (e.beta.size() == 0) continue;
        out << e.epoch;
        for (Eigen::Index j = 0; j < e.beta.size(); ++j) out << ',' << fmt(e.beta[j]);
        out << '\n';
    }
}

inline void write_scatter(const std::string& path, const std::vector<ScatterRow>& rows) {
    auto out = open_out(path);
    out << "segment_id,gt_speed,sim_speed_mean,sim_speed_std\n";
    for (const auto& r : rows)
        out << r.segment_id << ',' << fmt(r.gt_speed) << ',' << fmt(r.sim_speed_mean) << ','
            << fmt(r.sim_speed_std) << '\n';
}

}  // namespace odcal::io
