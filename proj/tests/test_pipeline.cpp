#include <set>

#include "doctest.h"
#include "map2seq/errors.hpp"
#include "pipeline.hpp"

using namespace map2seq;
using namespace map2seq::pipeline;
using streets::NodeId;

namespace {

const geo::GeoPoint kOrigin{40.75, -73.99};

// A 100 m east-west line of 11 nodes.
streets::StreetGraph line() {
    std::vector<streets::SegmentNode> nodes;
    std::vector<std::vector<NodeId>> adj(11);
    for (int i = 0; i <= 10; ++i) {
        nodes.push_back({i, {10.0 * i, 0.0}, false});
        if (i > 0) {
            adj[static_cast<std::size_t>(i)].push_back(i - 1);
            adj[static_cast<std::size_t>(i - 1)].push_back(i);
        }
    }
    return streets::StreetGraph(nodes, adj, kOrigin, 10.0);
}

streets::Route route(std::string id, std::vector<NodeId> ids) {
    streets::Route r;
    r.route_id = std::move(id);
    r.node_ids = std::move(ids);
    return r;
}

// Rectangle covering planar x in [lo, hi] around y = 0.
GeoRect band(double lo, double hi) {
    auto a = geo::unproject({lo, -5}, kOrigin);
    auto b = geo::unproject({hi, 5}, kOrigin);
    return {a.lat, a.lon, b.lat, b.lon};
}

}  // namespace

TEST_CASE("split by the unseen rectangle") {
    auto g = line();
    std::vector<streets::Route> routes{route("in", {6, 7, 8}), route("cross", {3, 4, 5, 6}), route("out1", {0, 1, 2}),
                                       route("out2", {1, 2, 3}), route("out3", {2, 1, 0})};
    SplitConfig cfg;
    cfg.unseen_rect = band(55, 100);
    cfg.partially_seen = 1;
    auto s = split_routes(routes, g, cfg, 1);
    CHECK(s.test_unseen == std::vector<std::string>{"in"});
    CHECK(s.dev == std::vector<std::string>{"cross"});
    CHECK(s.test_seen.size() == 1);
    CHECK(s.train.size() == 2);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.test_seen.begin(), s.test_seen.end());
    CHECK(all == std::set<std::string>{"out1", "out2", "out3"});

    // Every route inside the rectangle: all unseen.
    cfg.unseen_rect = band(-10, 110);
    auto inside = split_routes(routes, g, cfg, 1);
    CHECK(inside.test_unseen.size() == routes.size());
    CHECK(inside.train.empty());
}

TEST_CASE("split is seeded and warns when too few training routes remain") {
    auto g = line();
    std::vector<streets::Route> routes;
    for (int i = 0; i < 8; ++i) routes.push_back(route("r" + std::to_string(i), {i, i + 1}));
    SplitConfig cfg;
    cfg.partially_seen = 3;
    auto a = split_routes(routes, g, cfg, 42);
    auto b = split_routes(routes, g, cfg, 42);
    CHECK(a.test_seen == b.test_seen);
    CHECK(a.test_seen.size() == 3);
    CHECK(a.dev.empty());
    cfg.partially_seen = 20;
    std::vector<std::string> warnings;
    auto c = split_routes(routes, g, cfg, 42, &warnings);
    CHECK(c.test_seen.size() == 8);
    CHECK(warnings.size() == 1);
}

TEST_CASE("config defaults and JSON handling") {
    PipelineConfig d;
    CHECK(d.spacing == 10.0);
    CHECK(d.visibility_radius == 30.0);
    CHECK(d.min_nodes == 35);
    CHECK(d.max_nodes == 45);
    CHECK(d.model.d_model == 256);
    CHECK(d.model.heads == 8);
    CHECK(d.model.layers == 6);
    CHECK(d.train.batch_size == 12);
    CHECK(d.split.partially_seen == 700);
    auto round = config_from_json(nlohmann::json::parse(to_json(d).dump()));
    CHECK(to_json(round) == to_json(d));

    auto partial = config_from_json(nlohmann::json{{"routes", 12}, {"model", {{"d_model", 32}, {"heads", 4}}}});
    CHECK(partial.routes == 12);
    CHECK(partial.model.d_model == 32);
    CHECK(partial.model.layers == 6);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"rutes", 12}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"model", {{"d_model", 30}, {"heads", 4}}}}), ConfigError);
    CHECK(defaults_help().find("spacing") != std::string::npos);
}
