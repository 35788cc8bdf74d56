#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "odcal/network.hpp"
#include "odcal/rng.hpp"

// Synthetic network generator, the desk-scale stand-in for a real city
// model. Rules (all deterministic given the seed):
//   - every OD gets a dedicated entry and exit segment; route middles are
//     drawn without replacement from a shared pool of 3 * n_od_pairs
//     segments, so ODs couple through shared middles while each OD keeps an
//     identifying private segment (the assignment matrix has full column
//     rank);
//   - routes of one OD share their first and last segments and differ in the
//     middle; route-choice probabilities are normalized uniform(0.5, 1.5)
//     draws, with the last route set to 1 - sum(others) so they sum to 1
//     exactly;
//   - each routed segment's q_max is its worst-case demand (all ODs at their
//     upper bound) times a margin, so analytical segment demands stay strictly
//     inside the FD domain. Exit segments and the highest-load middles act as
//     bottlenecks (tight margin range); the rest of the network is built with
//     generous spare capacity and therefore runs close to free flow.

namespace odcal {

struct GeneratorConfig {
    int n_zones = 8;
    int n_od_pairs = 20;
    int routes_per_od = 3;
    int segments_per_route_min = 4;
    int segments_per_route_max = 8;
    double x_upper_min = 600.0;
    double x_upper_max = 1200.0;
    double length_min_m = 100.0;
    double length_max_m = 500.0;
    double v_max_min_ms = 10.0;
    double v_max_max_ms = 20.0;
    double v_min_ms = 1.0;
    double alpha1_min = 2.0;
    double alpha1_max = 2.0;
    double alpha2_min = 1.0;
    double alpha2_max = 1.0;
    double q_max_margin_min = 2.5;
    double q_max_margin_max = 4.0;
    int n_bottleneck_middles = 10;
    double bottleneck_margin_min = 1.05;
    double bottleneck_margin_max = 1.2;
    std::uint64_t seed = 1;

    static GeneratorConfig demo() { return {}; }

    // Scale parity with the paper-scale counts (62 ODs, 3 routes each).
    static GeneratorConfig paper_scale() {
        GeneratorConfig c;
        c.n_zones = 16;
        c.n_od_pairs = 62;
        return c;
    }
};

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("n_zones", c.n_zones);
    get("n_od_pairs", c.n_od_pairs);
    get("routes_per_od", c.routes_per_od);
    get("segments_per_route_min", c.segments_per_route_min);
    get("segments_per_route_max", c.segments_per_route_max);
    get("x_upper_min", c.x_upper_min);
    get("x_upper_max", c.x_upper_max);
    get("length_min_m", c.length_min_m);
    get("length_max_m", c.length_max_m);
    get("v_max_min_ms", c.v_max_min_ms);
    get("v_max_max_ms", c.v_max_max_ms);
    get("v_min_ms", c.v_min_ms);
    get("alpha1_min", c.alpha1_min);
    get("alpha1_max", c.alpha1_max);
    get("alpha2_min", c.alpha2_min);
    get("alpha2_max", c.alpha2_max);
    get("q_max_margin_min", c.q_max_margin_min);
    get("q_max_margin_max", c.q_max_margin_max);
    get("n_bottleneck_middles", c.n_bottleneck_middles);
    get("bottleneck_margin_min", c.bottleneck_margin_min);
    get("bottleneck_margin_max", c.bottleneck_margin_max);
    get("seed", c.seed);
    return c;
}

inline nlohmann::json network_to_json(const Network& net) {
    nlohmann::json doc;
    doc["segments"] = nlohmann::json::array();
    for (const auto& s : net.segments)
        doc["segments"].push_back({{"id", s.id},
                                   {"length_m", s.length_m},
                                   {"v_max_ms", s.v_max_ms},
                                   {"v_min_ms", s.v_min_ms},
                                   {"q_max_vph", s.q_max_vph},
                                   {"alpha1", s.alpha1},
                                   {"alpha2", s.alpha2}});
    doc["od_pairs"] = nlohmann::json::array();
    for (const auto& od : net.od_pairs) {
        nlohmann::json routes = nlohmann::json::array();
        for (const auto& r : od.routes)
            routes.push_back({{"segments", r.segment_ids}, {"prob", r.probability}});
        doc["od_pairs"].push_back({{"id", od.id},
                                   {"origin", od.origin},
                                   {"dest", od.dest},
                                   {"x_upper_vph", od.x_upper_vph},
                                   {"routes", routes}});
    }
    return doc;
}

inline Network generate_network(const GeneratorConfig& cfg) {
    if (cfg.routes_per_od < 1) throw std::invalid_argument("generate_network: routes_per_od must be >= 1");
    if (cfg.segments_per_route_min < 3 || cfg.segments_per_route_max < cfg.segments_per_route_min)
        throw std::invalid_argument("generate_network: segments_per_route range infeasible");
    if (cfg.n_od_pairs < 1 || cfg.n_zones < 2)
        throw std::invalid_argument("generate_network: needs >= 1 OD pair and >= 2 zones");

    const int pool_size = 3 * cfg.n_od_pairs;
    if (cfg.segments_per_route_max - 2 > pool_size)
        throw std::invalid_argument("generate_network: route length exceeds middle-segment pool");

    Network net;
    auto seg_id = [](const char* prefix, int i) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%s%04d", prefix, i);
        return std::string(buf);
    };

    rng::Stream attrs(rng::key_of(cfg.seed, rng::hash_str("segment-attrs")));
    auto make_segment = [&](const std::string& id) {
        Segment s;
        s.id = id;
        s.length_m = attrs.uniform(cfg.length_min_m, cfg.length_max_m);
        s.v_max_ms = attrs.uniform(cfg.v_max_min_ms, cfg.v_max_max_ms);
        s.v_min_ms = cfg.v_min_ms;
        s.q_max_vph = 1.0;  // placeholder; set from worst-case load below
        s.alpha1 = attrs.uniform(cfg.alpha1_min, cfg.alpha1_max);
        s.alpha2 = attrs.uniform(cfg.alpha2_min, cfg.alpha2_max);
        return s;
    };

    // shared middle pool first, then per-OD entry/exit segments
    for (int i = 0; i < pool_size; ++i) net.segments.push_back(make_segment(seg_id("m", i)));
    for (int z = 0; z < cfg.n_od_pairs; ++z) {
        net.segments.push_back(make_segment(seg_id("in", z)));
        net.segments.push_back(make_segment(seg_id("out", z)));
    }
    net.rebuild_index();

    rng::Stream odr(rng::key_of(cfg.seed, rng::hash_str("od-pairs")));
    for (int z = 0; z < cfg.n_od_pairs; ++z) {
        ODPair od;
        od.id = z + 1;
        const int o = static_cast<int>(odr.next_u64() % static_cast<std::uint64_t>(cfg.n_zones));
        int d = static_cast<int>(odr.next_u64() % static_cast<std::uint64_t>(cfg.n_zones - 1));
        if (d >= o) ++d;
        od.origin = "z" + std::to_string(o + 1);
        od.dest = "z" + std::to_string(d + 1);
        od.x_upper_vph = odr.uniform(cfg.x_upper_min, cfg.x_upper_max);

        std::set<std::vector<std::string>> seen_routes;
        for (int r = 0; r < cfg.routes_per_od; ++r) {
            Route route;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                const int len = cfg.segments_per_route_min +
                                static_cast<int>(odr.next_u64() %
                                                 static_cast<std::uint64_t>(
                                                     cfg.segments_per_route_max -
                                                     cfg.segments_per_route_min + 1));
                std::vector<std::string> ids{seg_id("in", z)};
                std::set<int> used;
                while (static_cast<int>(ids.size()) < len - 1) {
                    const int m = static_cast<int>(odr.next_u64() %
                                                   static_cast<std::uint64_t>(pool_size));
                    if (used.insert(m).second) ids.push_back(seg_id("m", m));
                }
                ids.push_back(seg_id("out", z));
                if (seen_routes.insert(ids).second) {
                    route.segment_ids = std::move(ids);
                    break;
                }
            }
            if (route.segment_ids.empty())
                throw std::invalid_argument("generate_network: could not draw distinct routes");
            od.routes.push_back(std::move(route));
        }

        double gsum = 0.0;
        std::vector<double> g(od.routes.size());
        for (auto& gi : g) {
            gi = odr.uniform(0.5, 1.5);
            gsum += gi;
        }
        double psum = 0.0;
        for (std::size_t r = 0; r + 1 < od.routes.size(); ++r) {
            od.routes[r].probability = g[r] / gsum;
            psum += od.routes[r].probability;
        }
        od.routes.back().probability = 1.0 - psum;
        net.od_pairs.push_back(std::move(od));
    }

    // capacities from worst-case loads; unrouted pool segments get a nominal one
    Eigen::VectorXd worst = Eigen::VectorXd::Zero(net.num_segments());
    for (const auto& od : net.od_pairs)
        for (const auto& r : od.routes)
            for (const auto& sid : r.segment_ids)
                worst[net.index_of(sid)] += od.x_upper_vph * r.probability;

    // bottlenecks: every exit segment plus the most heavily loaded middles
    std::vector<std::pair<double, int>> loaded_middles;
    for (int i = 0; i < net.num_segments(); ++i)
        if (net.segments[static_cast<std::size_t>(i)].id[0] == 'm' && worst[i] > 0.0)
            loaded_middles.emplace_back(worst[i], i);
    std::sort(loaded_middles.rbegin(), loaded_middles.rend());
    std::vector<char> bottleneck(static_cast<std::size_t>(net.num_segments()), 0);
    for (int k = 0; k < cfg.n_bottleneck_middles && k < static_cast<int>(loaded_middles.size()); ++k)
        bottleneck[static_cast<std::size_t>(loaded_middles[static_cast<std::size_t>(k)].second)] = 1;
    for (const auto& s : net.segments)
        if (s.id[0] == 'o') bottleneck[static_cast<std::size_t>(net.index_of(s.id))] = 1;

    rng::Stream caps(rng::key_of(cfg.seed, rng::hash_str("capacity")));
    for (int i = 0; i < net.num_segments(); ++i) {
        const double margin =
            bottleneck[static_cast<std::size_t>(i)]
                ? caps.uniform(cfg.bottleneck_margin_min, cfg.bottleneck_margin_max)
                : caps.uniform(cfg.q_max_margin_min, cfg.q_max_margin_max);
        net.segments[static_cast<std::size_t>(i)].q_max_vph =
            worst[i] > 0.0 ? worst[i] * margin : cfg.x_upper_max * margin;
    }
    return net;
}

}  // namespace odcal
