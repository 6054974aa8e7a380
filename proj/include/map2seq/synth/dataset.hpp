#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "map2seq/rng.hpp"
#include "map2seq/route_graph.hpp"
#include "map2seq/rule_gen.hpp"
#include "map2seq/street_graph.hpp"
#include "map2seq/synth/city.hpp"

namespace map2seq::synth {

// Full pipeline output for one synthetic city, produced through the OSM
// XML path so ingestion is exercised too.
struct CityData {
    osm::MapData map;
    streets::StreetGraph streets;
    std::vector<streets::Route> routes;
    std::vector<routegraph::RouteGraph> graphs;
};

CityData build_city_data(const PlanarCity& city, std::size_t routes, std::uint64_t seed,
                         const geo::GeoPoint& origin = kDefaultOrigin);

// Sentence-style rendering of rule events. Each clause has a fixed template;
// with probability `noise` a clause uses an alternative wording instead.
std::string paraphrase(const std::vector<rules::RuleEvent>& events, CounterRng& rng, double noise);

}  // namespace map2seq::synth
