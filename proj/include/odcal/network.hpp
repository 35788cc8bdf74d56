#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

// Network data model: segments, OD pairs with fixed route-choice
// probabilities, and the linear map from OD demands to segment demands.

namespace odcal {

using DemandVector = Eigen::VectorXd;
using AssignmentMatrix = Eigen::MatrixXd;

struct Segment {
    std::string id;
    double length_m = 0.0;
    double v_max_ms = 0.0;  // speed limit
    double v_min_ms = 0.0;
    double q_max_vph = 0.0;  // maximum demand
    double alpha1 = 0.0;
    double alpha2 = 0.0;
};

struct Route {
    std::vector<std::string> segment_ids;
    double probability = 0.0;
};

struct ODPair {
    int id = 0;  // 1-based index into Z
    std::string origin;
    std::string dest;
    double x_upper_vph = 0.0;
    std::vector<Route> routes;
};

struct Network {
    std::vector<Segment> segments;
    std::vector<ODPair> od_pairs;

    int num_segments() const { return static_cast<int>(segments.size()); }
    int num_od_pairs() const { return static_cast<int>(od_pairs.size()); }

    // Index of a segment id, or -1 when unknown.
    int index_of(const std::string& seg_id) const {
        auto it = index_.find(seg_id);
        return it == index_.end() ? -1 : it->second;
    }

    void rebuild_index() {
        index_.clear();
        for (int i = 0; i < num_segments(); ++i) index_[segments[i].id] = i;
    }

    DemandVector upper_bounds() const {
        DemandVector x_u(num_od_pairs());
        for (int z = 0; z < num_od_pairs(); ++z) x_u[z] = od_pairs[z].x_upper_vph;
        return x_u;
    }

    // True for every segment that appears on at least one route.
    std::vector<bool> routed_segments() const {
        std::vector<bool> routed(segments.size(), false);
        for (const auto& od : od_pairs)
            for (const auto& r : od.routes)
                for (const auto& sid : r.segment_ids) {
                    const int i = index_of(sid);
                    if (i >= 0) routed[static_cast<std::size_t>(i)] = true;
                }
        return routed;
    }

  private:
    std::unordered_map<std::string, int> index_;
};

struct Diagnostic {
    std::string entity;  // offending segment/OD id
    std::string rule;
    std::string message;
};

inline std::vector<Diagnostic> validate_network(const Network& net) {
    std::vector<Diagnostic> out;
    auto add = [&](std::string entity, std::string rule, std::string msg) {
        out.push_back({std::move(entity), std::move(rule), std::move(msg)});
    };

    std::unordered_set<std::string> seen_ids;
    for (const auto& s : net.segments) {
        if (!seen_ids.insert(s.id).second)
            add(s.id, "segment-id-unique", "duplicate segment id");
        if (!(s.length_m > 0.0)) add(s.id, "length-positive", "length must be > 0");
        if (!(s.v_min_ms >= 0.0 && s.v_min_ms < s.v_max_ms))
            add(s.id, "speed-order", "requires 0 <= v_min < v_max");
        if (!(s.q_max_vph > 0.0)) add(s.id, "q-max-positive", "q_max must be > 0");
        if (!(s.alpha1 > 0.0 && s.alpha2 > 0.0))
            add(s.id, "alpha-positive", "alpha1 and alpha2 must be > 0");
    }

    for (int z = 0; z < net.num_od_pairs(); ++z) {
        const auto& od = net.od_pairs[z];
        const std::string od_name = "od " + std::to_string(od.id);
        if (od.id != z + 1)
            add(od_name, "od-index", "OD indices must be contiguous from 1");
        if (!(od.x_upper_vph > 0.0)) add(od_name, "x-upper-positive", "x_upper must be > 0");
        if (od.routes.empty()) {
            add(od_name, "routes-nonempty", "OD has no routes");
            continue;
        }
        double psum = 0.0;
        for (const auto& r : od.routes) {
            if (!(r.probability >= 0.0 && r.probability <= 1.0))
                add(od_name, "probability-range", "route probability outside [0,1]");
            psum += r.probability;
            std::unordered_set<std::string> in_route;
            for (const auto& sid : r.segment_ids) {
                if (net.index_of(sid) < 0)
                    add(sid, "unknown-segment", "route of " + od_name + " references unknown segment " + sid);
                if (!in_route.insert(sid).second)
                    add(od_name, "repeated-segment", "segment " + sid + " repeated within a route");
            }
        }
        if (std::abs(psum - 1.0) > 1e-9)
            add(od_name, "probability-sum", "route probabilities sum to " + std::to_string(psum));
    }
    return out;
}

inline Network load_network(const nlohmann::json& doc) {
    Network net;
    auto require = [](const nlohmann::json& j, const char* field, const std::string& entity) -> const nlohmann::json& {
        if (!j.contains(field))
            throw std::runtime_error("network schema: " + entity + ": missing field '" + field + "'");
        return j.at(field);
    };
    if (!doc.contains("segments") || !doc.contains("od_pairs"))
        throw std::runtime_error("network schema: document requires 'segments' and 'od_pairs'");

    for (const auto& js : doc.at("segments")) {
        Segment s;
        s.id = require(js, "id", "segment").get<std::string>();
        s.length_m = require(js, "length_m", s.id).get<double>();
        s.v_max_ms = require(js, "v_max_ms", s.id).get<double>();
        s.v_min_ms = require(js, "v_min_ms", s.id).get<double>();
        s.q_max_vph = require(js, "q_max_vph", s.id).get<double>();
        s.alpha1 = require(js, "alpha1", s.id).get<double>();
        s.alpha2 = require(js, "alpha2", s.id).get<double>();
        net.segments.push_back(std::move(s));
    }
    for (const auto& jo : doc.at("od_pairs")) {
        ODPair od;
        od.id = require(jo, "id", "od_pair").get<int>();
        const std::string name = "od " + std::to_string(od.id);
        od.origin = require(jo, "origin", name).get<std::string>();
        od.dest = require(jo, "dest", name).get<std::string>();
        od.x_upper_vph = require(jo, "x_upper_vph", name).get<double>();
        for (const auto& jr : require(jo, "routes", name)) {
            Route r;
            for (const auto& sid : require(jr, "segments", name)) r.segment_ids.push_back(sid.get<std::string>());
            r.probability = require(jr, "prob", name).get<double>();
            od.routes.push_back(std::move(r));
        }
        net.od_pairs.push_back(std::move(od));
    }
    net.rebuild_index();

    const auto diags = validate_network(net);
    if (!diags.empty()) {
        std::string msg = "invalid network:";
        for (const auto& d : diags) msg += " [" + d.entity + ": " + d.rule + " — " + d.message + "]";
        throw std::runtime_error(msg);
    }
    return net;
}

inline Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file: " + path);
    nlohmann::json doc;
    in >> doc;
    return load_network(doc);
}

// A_{i,z} = sum of choice probabilities of OD z's routes traversing segment i.
inline AssignmentMatrix build_assignment_matrix(const Network& net) {
    AssignmentMatrix a = AssignmentMatrix::Zero(net.num_segments(), net.num_od_pairs());
    for (int z = 0; z < net.num_od_pairs(); ++z)
        for (const auto& r : net.od_pairs[z].routes)
            for (const auto& sid : r.segment_ids) a(net.index_of(sid), z) += r.probability;
    return a;
}

inline Eigen::VectorXd map_demand(const AssignmentMatrix& a, const DemandVector& x) {
    if (a.cols() != x.size())
        throw std::invalid_argument("map_demand: dimension mismatch (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(x.size()) + ")");
    return a * x;
}

}  // namespace odcal
