#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "map2seq/geodesy.hpp"
#include "map2seq/osm_ingest.hpp"
#include "map2seq/street_graph.hpp"

namespace map2seq::routegraph {

enum class NodeType : std::uint8_t {
    kStreet = 0,
    kPoi,
    kTagKey,
    kTagValue,
    kName1,
    kName2,
    kName3,
    kName4Plus,
};

inline constexpr int kNodeTypeCount = 8;

// Relation ids used by the encoder: 0..11 angle bins, 12 unlabeled.
inline constexpr int kUnlabeled = geo::kAngleBins;
inline constexpr int kRelationCount = geo::kAngleBins + 1;

std::string_view type_token(NodeType t);
NodeType type_from_token(std::string_view token);
// Name-word type for a 1-based word position; positions >= 4 share a type.
NodeType name_type(std::size_t position);
bool is_name_type(NodeType t);

inline constexpr std::string_view kLastToken = "<last>";
inline constexpr std::string_view kNeighborToken = "<neighbor>";
std::string position_token(std::size_t position);  // "<P>", 1-based

struct GraphNode {
    int id = 0;
    NodeType type = NodeType::kStreet;
    std::string token;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
    int src = 0;
    int dst = 0;
    int label = kUnlabeled;  // angle bin index, or kUnlabeled

    bool labeled() const { return label != kUnlabeled; }
    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
    friend auto operator<=>(const GraphEdge&, const GraphEdge&) = default;
};

// Directed route graph. Canonical node order: route nodes by position
// (graph ids 0..P-1), neighbor street nodes, POIs by OSM id, then the tag
// and name nodes of each POI in POI order.
struct RouteGraph {
    std::string route_id;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;  // sorted by (src, dst), unique
    std::vector<streets::NodeId> route_node_ids;
    // Provenance, not model input.
    std::vector<osm::OsmId> poi_ids;             // one per poi node, in node order
    std::vector<std::size_t> signal_positions;   // 0-based route positions with a traffic signal

    std::size_t route_length() const { return route_node_ids.size(); }
    std::vector<int> poi_nodes() const;
    friend bool operator==(const RouteGraph&, const RouteGraph&) = default;
};

struct VisiblePoi {
    std::size_t poi_index = 0;  // into MapData::pois
    geo::PlanePoint sight_point;
};

// Spatial lookup over POIs and buildings of one map; built once, shared by
// every route of that map.
class VisibilityIndex {
public:
    explicit VisibilityIndex(const osm::MapData& map, double cell_size = 30.0);

    // POIs within `radius` of `at` whose sight line is not occluded, in
    // ascending POI index order.
    std::vector<VisiblePoi> visible_pois(const geo::PlanePoint& at, double radius) const;

    const osm::MapData& map() const { return *map_; }

private:
    struct Cell {
        std::vector<std::size_t> pois;
        std::vector<std::size_t> buildings;
    };
    const Cell* cell(std::int64_t cx, std::int64_t cy) const;
    std::vector<std::size_t> buildings_near(const geo::PlanePoint& a, const geo::PlanePoint& b) const;

    const osm::MapData* map_;
    double cell_size_;
    std::vector<geo::PlanePoint> poi_points_;
    std::unordered_map<std::uint64_t, Cell> cells_;
};

// POIs seen from `segment` within `radius`, not blocked by any building.
std::vector<VisiblePoi> visible_pois(const geo::PlanePoint& segment, const osm::MapData& map,
                                     double radius = 30.0);

// (bearing(from, to) - route_dir) wrapped to [0, 360).
double relative_angle(const geo::PlanePoint& from, const geo::PlanePoint& to, double route_dir_deg);

struct BuildOptions {
    double visibility_radius = 30.0;
};

RouteGraph build_route_graph(const streets::Route& route, const streets::StreetGraph& g,
                             const VisibilityIndex& index, const BuildOptions& options = {});
RouteGraph build_route_graph(const streets::Route& route, const streets::StreetGraph& g,
                             const osm::MapData& map, const BuildOptions& options = {});

// Structural invariants; returns the violations (empty when valid).
std::vector<std::string> check_graph(const RouteGraph& g);

inline constexpr std::string_view kGraphSchema = "map2seq.route_graph/1";

nlohmann::ordered_json serialize(const RouteGraph& g);
// Throws SchemaError on a version mismatch or an invalid graph.
RouteGraph deserialize(const nlohmann::json& record);

struct GraphStats {
    double mean_nodes = 0;
    double mean_edges_per_node = 0;
    std::size_t distinct_tokens = 0;
};
GraphStats graph_stats(const std::vector<RouteGraph>& graphs);

}  // namespace map2seq::routegraph
