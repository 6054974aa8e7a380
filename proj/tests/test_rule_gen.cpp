#include <set>

#include "doctest.h"
#include "map2seq/errors.hpp"
#include "map2seq/model/vocab.hpp"
#include "map2seq/rule_gen.hpp"
#include "map2seq/synth/dataset.hpp"

using namespace map2seq;
using namespace map2seq::rules;
using routegraph::NodeType;

namespace {

const geo::GeoPoint kOrigin{40.75, -73.99};

// East-running street crossed by a north spur at x = 100; route x = 0..150.
routegraph::RouteGraph straight_route(std::vector<osm::Poi> pois, bool signal = false, bool turn = false) {
    osm::MapData map;
    map.projection_origin = kOrigin;
    auto at = [](double x, double y) { return geo::unproject({x, y}, kOrigin); };
    map.street_polylines = {{at(0, 0), at(100, 0), at(200, 0)}, {at(100, 0), at(100, 60)}};
    if (signal) map.traffic_signals.push_back(at(100, 0));
    map.pois = std::move(pois);
    auto g = streets::discretize(map);
    auto find = [&](double x, double y) {
        for (const auto& n : g.nodes()) {
            if (geo::distance(n.position, {x, y}) < 0.01) return n.id;
        }
        return streets::NodeId{-1};
    };
    streets::Route r;
    r.route_id = "r";
    r.node_ids = streets::shortest_path(g, find(0, 0), turn ? find(100, 50) : find(150, 0));
    return routegraph::build_route_graph(r, g, map);
}

osm::Poi poi(osm::OsmId id, double x, double y, std::vector<osm::OsmTag> tags) {
    osm::Poi p;
    p.id = id;
    p.location = geo::unproject({x, y}, kOrigin);
    p.tags = std::move(tags);
    for (const auto& t : p.tags) {
        if (t.key == "name") p.name_words = osm::split_name(t.value);
    }
    return p;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string s;
    for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
    return s;
}

}  // namespace

TEST_CASE("side and direction of angle bins") {
    CHECK(side_of_bin(0) == "right");
    CHECK(side_of_bin(3) == "right");
    CHECK(side_of_bin(6) == "right");
    CHECK(side_of_bin(7) == "left");
    CHECK(side_of_bin(9) == "left");
    CHECK(direction_of_bin(0) == "straight");
    CHECK(direction_of_bin(3) == "right");
    CHECK(direction_of_bin(9) == "left");
}

TEST_CASE("straight route with one crossed intersection") {
    CHECK(rule_based_text(straight_route({})) == "intersection straight stop");
    CHECK(rule_based_text(straight_route({}, true)) == "light straight stop");
}

TEST_CASE("a turn at the junction gives its direction") {
    // Heading east, the spur goes north: a left turn.
    CHECK(rule_based_text(straight_route({}, false, true)) == "intersection left stop");
}

TEST_CASE("POIs are named with their side, unnamed ones by tag value") {
    auto g = straight_route({poi(1, 30, 8, {{"amenity", "cafe"}, {"name", "Starbucks Coffee"}}),
                             poi(2, 60, -8, {{"amenity", "fast_food"}, {"cuisine", "pizza"}}),
                             poi(3, 130, -8, {{"amenity", "bicycle_parking"}})});
    CHECK(rule_based_text(g) == "Starbucks Coffee left pizza right intersection straight bicycle parking right stop");
    auto events = rule_events(g);
    REQUIRE(events.size() == 5);
    CHECK(events[0].kind == RuleEvent::Kind::kPoi);
    CHECK(events[3].position > events[2].position);
    CHECK(events.back().kind == RuleEvent::Kind::kStop);
}

TEST_CASE("rule output invariants on synthetic routes") {
    synth::CityOptions opts;
    opts.seed = 31;
    opts.signal_probability = 0.5;
    auto data = synth::build_city_data(synth::make_city(opts), 6, 4);
    for (const auto& g : data.graphs) {
        auto tokens = generate_rule_based(g);
        REQUIRE_FALSE(tokens.empty());
        CHECK(tokens.back() == "stop");
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (tokens[i] == "light" || tokens[i] == "intersection") {
                REQUIRE(i + 1 < tokens.size());
                CHECK((tokens[i + 1] == "left" || tokens[i + 1] == "right" || tokens[i + 1] == "straight"));
            }
        }
        std::set<std::string> surfaces;
        for (int p : g.poi_nodes()) surfaces.insert(poi_surface(g, p));
        for (const auto& e : rule_events(g)) {
            if (e.kind == RuleEvent::Kind::kPoi) CHECK(surfaces.count(e.surface) == 1);
        }
    }
}

TEST_CASE("pretraining set") {
    synth::CityOptions opts;
    opts.seed = 2;
    auto data = synth::build_city_data(synth::make_city(opts), 3, 9);
    CHECK(make_pretraining_set(data.graphs, 0, 1).records.empty());
    auto three = make_pretraining_set(data.graphs, 3, 1);
    REQUIRE(three.records.size() == 3);
    CHECK(three.warnings.empty());
    std::set<std::string> ids;
    for (const auto& r : three.records) {
        ids.insert(r.route_id);
        for (const auto& g : data.graphs) {
            if (g.route_id == r.route_id) CHECK(r.instruction_text == join(generate_rule_based(g)));
        }
    }
    CHECK(ids.size() == 3);
    CHECK(make_pretraining_set(data.graphs, 7, 5).records == make_pretraining_set(data.graphs, 7, 5).records);
    auto more = make_pretraining_set(data.graphs, 7, 5);
    CHECK(more.records.size() == 7);
    CHECK_FALSE(more.warnings.empty());
    CHECK_THROWS_AS(make_pretraining_set({}, 2, 1), ConfigError);
}

TEST_CASE("paraphrase renders every event as a clause") {
    std::vector<RuleEvent> events{{RuleEvent::Kind::kPoi, 2, "Chipotle", "left"},
                                  {RuleEvent::Kind::kJunction, 5, "light", "right"},
                                  {RuleEvent::Kind::kJunction, 9, "intersection", "straight"},
                                  {RuleEvent::Kind::kStop, 20, "stop", ""}};
    CounterRng rng(1);
    auto text = synth::paraphrase(events, rng, 0.0);
    CHECK(text.find("Chipotle") != std::string::npos);
    CHECK(text.find("right") != std::string::npos);
    auto tokens = model::tokenize(text);
    CHECK(tokens.back() == ".");
    CounterRng a(4), b(4);
    CHECK(synth::paraphrase(events, a, 0.5) == synth::paraphrase(events, b, 0.5));
}
