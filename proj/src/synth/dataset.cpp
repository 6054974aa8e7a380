#include "map2seq/synth/dataset.hpp"

#include <sstream>

namespace map2seq::synth {

CityData build_city_data(const PlanarCity& city, std::size_t routes, std::uint64_t seed, const geo::GeoPoint& origin) {
    CityData out;
    std::istringstream xml(to_osm_xml(city, origin));
    out.map = osm::parse_osm(xml);
    osm::validate(out.map);
    out.streets = streets::discretize(out.map, 10.0);
    out.routes = streets::sample_routes(out.streets, out.map, routes, seed).routes;
    const routegraph::VisibilityIndex index(out.map);
    for (const auto& r : out.routes) out.graphs.push_back(routegraph::build_route_graph(r, out.streets, index));
    return out;
}

std::string paraphrase(const std::vector<rules::RuleEvent>& events, CounterRng& rng, double noise) {
    using Kind = rules::RuleEvent::Kind;
    std::string out;
    auto clause = [&](const std::string& s) { out += (out.empty() ? "" : " ") + s + " ."; };
    for (const auto& e : events) {
        const bool alt = rng.uniform() < noise;
        switch (e.kind) {
            case Kind::kPoi:
                clause((alt ? "walk past " : "pass ") + e.surface + " on your " + e.direction);
                break;
            case Kind::kJunction:
                if (e.direction == "straight")
                    clause((alt ? "continue straight through the " : "go straight through the ") + e.surface);
                else
                    clause((alt ? "make a " + e.direction + " at the " : "turn " + e.direction + " at the ") +
                           e.surface);
                break;
            case Kind::kStop:
                clause(alt ? "stop here" : "stop");
                break;
        }
    }
    return out;
}

}  // namespace map2seq::synth
