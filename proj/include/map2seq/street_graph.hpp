#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "map2seq/geodesy.hpp"
#include "map2seq/osm_ingest.hpp"

namespace map2seq::streets {

using NodeId = std::int32_t;

struct SegmentNode {
    NodeId id = 0;
    geo::PlanePoint position;
    bool traffic_signal = false;

    friend bool operator==(const SegmentNode&, const SegmentNode&) = default;
};

// Undirected graph of street segments spaced (at most) `spacing` meters
// apart. Node ids follow the sweep order of the input polylines.
class StreetGraph {
public:
    StreetGraph() = default;
    StreetGraph(std::vector<SegmentNode> nodes, std::vector<std::vector<NodeId>> adjacency,
                geo::GeoPoint projection_origin, double spacing);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<SegmentNode>& nodes() const { return nodes_; }
    const SegmentNode& node(NodeId id) const;
    const std::vector<NodeId>& neighbors(NodeId id) const;
    std::size_t degree(NodeId id) const { return neighbors(id).size(); }
    bool contains(NodeId id) const { return id >= 0 && static_cast<std::size_t>(id) < nodes_.size(); }
    bool adjacent(NodeId a, NodeId b) const;
    int component(NodeId id) const { return component_.at(static_cast<std::size_t>(id)); }
    std::size_t edge_count() const;

    const geo::GeoPoint& projection_origin() const { return origin_; }
    double spacing() const { return spacing_; }

    friend bool operator==(const StreetGraph&, const StreetGraph&) = default;

private:
    std::vector<SegmentNode> nodes_;
    std::vector<std::vector<NodeId>> adjacency_;
    std::vector<int> component_;
    geo::GeoPoint origin_;
    double spacing_ = 10.0;
};

struct Route {
    std::string route_id;
    std::vector<NodeId> node_ids;
    osm::OsmId goal_poi = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const Route&, const Route&) = default;
};

inline constexpr double kWeldRadiusM = 1.0;

// Resamples every street polyline at `spacing` meters of arc length,
// keeping polyline endpoints and junction vertices (coordinates shared by
// several polylines), then welds nodes closer than kWeldRadiusM.
StreetGraph discretize(const osm::MapData& map, double spacing = 10.0);

// Minimum-hop path; among equal-hop paths the lexicographically smallest
// node-id sequence. Throws NoPathError when t is unreachable from s.
std::vector<NodeId> shortest_path(const StreetGraph& g, NodeId s, NodeId t);

// Degree above two. Throws OutOfRangeError for unknown ids.
bool is_intersection(const StreetGraph& g, NodeId id);

std::size_t count_intersections(const StreetGraph& g, const std::vector<NodeId>& route);

// Interior intersections whose exit heading leaves the straight band
// [345, 15) degrees relative to the entry heading.
std::size_t count_turns(const StreetGraph& g, const std::vector<NodeId>& route);

// Hop distances from `source`, -1 for unreachable nodes.
std::vector<int> hop_distances(const StreetGraph& g, NodeId source, int max_hops = -1);

struct RouteConstraints {
    std::size_t min_nodes = 35;
    std::size_t max_nodes = 45;
    std::size_t min_intersections = 3;
    double goal_radius = 30.0;
    std::size_t attempts_per_route = 2000;
};

struct SampleResult {
    std::vector<Route> routes;
    std::vector<std::string> warnings;
};

// Distance from a plane point to a POI (zero inside an area POI).
double poi_distance(const osm::MapData& map, const osm::Poi& poi, const geo::PlanePoint& p);

// Distances this close count as equal when picking a route goal, so that
// projection distortion cannot reorder equidistant POIs.
inline constexpr double kGoalTieM = 0.05;

// Nearest POI within `radius` of each street node, -1 when none. POIs within
// kGoalTieM of the nearest distance tie; the smaller POI id wins.
std::vector<std::ptrdiff_t> nearest_pois(const StreetGraph& g, const osm::MapData& map, double radius);

// Seeded rejection sampling of distinct routes satisfying `constraints`.
SampleResult sample_routes(const StreetGraph& g, const osm::MapData& map, std::size_t n,
                           std::uint64_t seed, const RouteConstraints& constraints = {});

// Independent check of every route invariant; returns the violations.
std::vector<std::string> check_route(const StreetGraph& g, const osm::MapData& map, const Route& route,
                                     const RouteConstraints& constraints = {});

nlohmann::ordered_json to_json(const StreetGraph& g);
StreetGraph street_graph_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const Route& r);
Route route_from_json(const nlohmann::json& j);

}  // namespace map2seq::streets
