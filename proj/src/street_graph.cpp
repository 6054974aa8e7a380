#include "map2seq/street_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"

namespace map2seq::streets {
namespace {

struct CellKey {
    std::int64_t cx, cy;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        return static_cast<std::size_t>(mix64(static_cast<std::uint64_t>(k.cx) * 0x9E3779B1u ^
                                              static_cast<std::uint64_t>(k.cy)));
    }
};

CellKey cell_of(const geo::PlanePoint& p, double size) {
    return {static_cast<std::int64_t>(std::floor(p.x / size)),
            static_cast<std::int64_t>(std::floor(p.y / size))};
}

// Uniform grid of node ids used for welding.
class WeldGrid {
public:
    explicit WeldGrid(double radius) : radius_(radius) {}

    NodeId find(const geo::PlanePoint& p, const std::vector<SegmentNode>& nodes) const {
        CellKey c = cell_of(p, radius_);
        NodeId best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = cells_.find({c.cx + dx, c.cy + dy});
                if (it == cells_.end()) continue;
                for (NodeId id : it->second) {
                    double d = geo::distance(nodes[static_cast<std::size_t>(id)].position, p);
                    if (d <= radius_ && (d < best_d || (d == best_d && id < best))) {
                        best = id;
                        best_d = d;
                    }
                }
            }
        }
        return best;
    }

    void insert(NodeId id, const geo::PlanePoint& p) { cells_[cell_of(p, radius_)].push_back(id); }

private:
    double radius_;
    std::unordered_map<CellKey, std::vector<NodeId>, CellHash> cells_;
};

// Samples one junction-free section at multiples of `spacing`, endpoint kept.
void resample_section(const std::vector<geo::PlanePoint>& pts, std::size_t begin, std::size_t end,
                      double spacing, std::vector<geo::PlanePoint>& out) {
    if (out.empty()) out.push_back(pts[begin]);
    double next = spacing;   // arc length of the next sample
    double walked = 0.0;     // arc length at pts[i]
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += geo::distance(pts[i], pts[i + 1]);
    for (std::size_t i = begin; i < end; ++i) {
        const geo::PlanePoint& a = pts[i];
        const geo::PlanePoint& b = pts[i + 1];
        double len = geo::distance(a, b);
        while (next <= walked + len && total - next > 1e-6) {
            double t = len > 0 ? (next - walked) / len : 0.0;
            out.push_back(a + (b - a) * t);
            next += spacing;
        }
        walked += len;
    }
    out.push_back(pts[end]);
}

void check_id(const StreetGraph& g, NodeId id, const char* op) {
    if (!g.contains(id)) {
        throw OutOfRangeError(std::string(op) + ": unknown street node " + std::to_string(id));
    }
}

}  // namespace

StreetGraph::StreetGraph(std::vector<SegmentNode> nodes, std::vector<std::vector<NodeId>> adjacency,
                         geo::GeoPoint projection_origin, double spacing)
    : nodes_(std::move(nodes)),
      adjacency_(std::move(adjacency)),
      component_(nodes_.size(), -1),
      origin_(projection_origin),
      spacing_(spacing) {
    if (adjacency_.size() != nodes_.size()) {
        throw SchemaError("street graph: adjacency size does not match node count");
    }
    for (auto& adj : adjacency_) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    int comp = 0;
    for (std::size_t s = 0; s < nodes_.size(); ++s) {
        if (component_[s] >= 0) continue;
        std::deque<std::size_t> queue{s};
        component_[s] = comp;
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop_front();
            for (NodeId v : adjacency_[u]) {
                auto vi = static_cast<std::size_t>(v);
                if (component_[vi] < 0) {
                    component_[vi] = comp;
                    queue.push_back(vi);
                }
            }
        }
        ++comp;
    }
}

const SegmentNode& StreetGraph::node(NodeId id) const {
    if (!contains(id)) throw OutOfRangeError("street graph: unknown node " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
}

const std::vector<NodeId>& StreetGraph::neighbors(NodeId id) const {
    if (!contains(id)) throw OutOfRangeError("street graph: unknown node " + std::to_string(id));
    return adjacency_[static_cast<std::size_t>(id)];
}

bool StreetGraph::adjacent(NodeId a, NodeId b) const {
    const auto& adj = neighbors(a);
    return std::binary_search(adj.begin(), adj.end(), b);
}

std::size_t StreetGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& adj : adjacency_) n += adj.size();
    return n / 2;
}

StreetGraph discretize(const osm::MapData& map, double spacing) {
    if (!(spacing > 0)) throw ConfigError("discretize: spacing must be positive");
    if (map.street_polylines.empty()) throw DegenerateInputError("discretize: map has no streets");

    std::vector<std::vector<geo::PlanePoint>> lines;
    lines.reserve(map.street_polylines.size());
    for (const auto& line : map.street_polylines) {
        std::vector<geo::PlanePoint> pts;
        for (const auto& p : line) {
            geo::PlanePoint q = map.to_plane(p);
            if (pts.empty() || !(pts.back() == q)) pts.push_back(q);
        }
        if (pts.size() >= 2) lines.push_back(std::move(pts));
    }
    if (lines.empty()) throw DegenerateInputError("discretize: all streets are degenerate");

    // Vertices shared between polylines (or repeated in one) are junctions.
    std::map<std::pair<double, double>, int> occurrences;
    for (const auto& pts : lines) {
        for (const auto& p : pts) ++occurrences[{p.x, p.y}];
    }

    std::vector<SegmentNode> nodes;
    std::vector<std::set<NodeId>> adjacency;
    WeldGrid grid(kWeldRadiusM);
    auto node_for = [&](const geo::PlanePoint& p) {
        NodeId id = grid.find(p, nodes);
        if (id >= 0) return id;
        id = static_cast<NodeId>(nodes.size());
        nodes.push_back({id, p, false});
        adjacency.emplace_back();
        grid.insert(id, p);
        return id;
    };

    for (const auto& pts : lines) {
        std::vector<geo::PlanePoint> samples;
        std::size_t begin = 0;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            bool junction = occurrences[{pts[i].x, pts[i].y}] > 1;
            if (junction || i + 1 == pts.size()) {
                resample_section(pts, begin, i, spacing, samples);
                begin = i;
            }
        }
        NodeId prev = -1;
        for (const auto& s : samples) {
            NodeId id = node_for(s);
            if (prev >= 0 && prev != id) {
                adjacency[static_cast<std::size_t>(prev)].insert(id);
                adjacency[static_cast<std::size_t>(id)].insert(prev);
            }
            prev = id;
        }
    }

    for (const auto& sig : map.traffic_signals) {
        geo::PlanePoint p = map.to_plane(sig);
        NodeId id = grid.find(p, nodes);
        if (id >= 0) nodes[static_cast<std::size_t>(id)].traffic_signal = true;
    }

    std::vector<std::vector<NodeId>> adj;
    adj.reserve(adjacency.size());
    for (const auto& s : adjacency) adj.emplace_back(s.begin(), s.end());
    return StreetGraph(std::move(nodes), std::move(adj), map.projection_origin, spacing);
}

std::vector<int> hop_distances(const StreetGraph& g, NodeId source, int max_hops) {
    check_id(g, source, "hop_distances");
    std::vector<int> dist(g.size(), -1);
    std::deque<NodeId> queue{source};
    dist[static_cast<std::size_t>(source)] = 0;
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        int du = dist[static_cast<std::size_t>(u)];
        if (max_hops >= 0 && du >= max_hops) continue;
        for (NodeId v : g.neighbors(u)) {
            auto& dv = dist[static_cast<std::size_t>(v)];
            if (dv < 0) {
                dv = du + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

std::vector<NodeId> shortest_path(const StreetGraph& g, NodeId s, NodeId t) {
    check_id(g, s, "shortest_path");
    check_id(g, t, "shortest_path");
    if (s == t) return {s};
    if (g.component(s) != g.component(t)) {
        throw NoPathError("no path between street nodes " + std::to_string(s) + " and " +
                          std::to_string(t));
    }
    // Distances to t; walking greedily to the smallest-id neighbor one hop
    // closer yields the lexicographically smallest shortest path.
    std::vector<int> to_t = hop_distances(g, t);
    std::vector<NodeId> path{s};
    NodeId cur = s;
    while (cur != t) {
        int want = to_t[static_cast<std::size_t>(cur)] - 1;
        for (NodeId v : g.neighbors(cur)) {  // sorted ascending
            if (to_t[static_cast<std::size_t>(v)] == want) {
                cur = v;
                break;
            }
        }
        path.push_back(cur);
    }
    return path;
}

bool is_intersection(const StreetGraph& g, NodeId id) {
    check_id(g, id, "is_intersection");
    return g.degree(id) > 2;
}

std::size_t count_intersections(const StreetGraph& g, const std::vector<NodeId>& route) {
    return static_cast<std::size_t>(std::count_if(
        route.begin(), route.end(), [&](NodeId id) { return is_intersection(g, id); }));
}

std::size_t count_turns(const StreetGraph& g, const std::vector<NodeId>& route) {
    std::size_t turns = 0;
    for (std::size_t i = 1; i + 1 < route.size(); ++i) {
        if (!is_intersection(g, route[i])) continue;
        const auto& prev = g.node(route[i - 1]).position;
        const auto& cur = g.node(route[i]).position;
        const auto& next = g.node(route[i + 1]).position;
        double rel = geo::wrap_degrees(geo::bearing(cur, next) - geo::bearing(prev, cur));
        if (geo::stable_angle_bin(rel).index != 0) ++turns;
    }
    return turns;
}

double poi_distance(const osm::MapData& map, const osm::Poi& poi, const geo::PlanePoint& p) {
    if (poi.area) {
        if (geo::point_strictly_inside(p, *poi.area)) return 0.0;
        return geo::distance(p, geo::closest_point_on_polygon(p, *poi.area));
    }
    return geo::distance(p, map.to_plane(poi.location));
}

std::vector<std::ptrdiff_t> nearest_pois(const StreetGraph& g, const osm::MapData& map, double radius) {
    std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells;
    for (std::size_t i = 0; i < map.pois.size(); ++i) {
        const auto& poi = map.pois[i];
        std::vector<geo::PlanePoint> pts;
        if (poi.area) {
            pts = poi.area->vertices;
        } else {
            pts.push_back(map.to_plane(poi.location));
        }
        double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
        for (const auto& p : pts) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        CellKey lo = cell_of({min_x - radius, min_y - radius}, radius);
        CellKey hi = cell_of({max_x + radius, max_y + radius}, radius);
        for (auto cx = lo.cx; cx <= hi.cx; ++cx) {
            for (auto cy = lo.cy; cy <= hi.cy; ++cy) cells[{cx, cy}].push_back(i);
        }
    }
    std::vector<std::ptrdiff_t> out(g.size(), -1);
    for (const auto& node : g.nodes()) {
        auto it = cells.find(cell_of(node.position, radius));
        if (it == cells.end()) continue;
        std::vector<std::pair<double, std::size_t>> within;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : it->second) {
            double d = poi_distance(map, map.pois[i], node.position);
            if (d > radius) continue;
            within.emplace_back(d, i);
            best = std::min(best, d);
        }
        std::ptrdiff_t best_i = -1;
        for (const auto& [d, i] : within) {
            if (d > best + kGoalTieM) continue;
            if (best_i < 0 || map.pois[i].id < map.pois[static_cast<std::size_t>(best_i)].id) {
                best_i = static_cast<std::ptrdiff_t>(i);
            }
        }
        out[static_cast<std::size_t>(node.id)] = best_i;
    }
    return out;
}

SampleResult sample_routes(const StreetGraph& g, const osm::MapData& map, std::size_t n,
                           std::uint64_t seed, const RouteConstraints& constraints) {
    if (n == 0) throw ConfigError("sample_routes: n must be at least 1");
    SampleResult result;
    if (g.size() < constraints.min_nodes) {
        result.warnings.push_back("street graph has " + std::to_string(g.size()) +
                                  " nodes, fewer than the minimum route length");
        return result;
    }
    const auto goals = nearest_pois(g, map, constraints.goal_radius);
    const int min_hops = static_cast<int>(constraints.min_nodes) - 1;
    const int max_hops = static_cast<int>(constraints.max_nodes) - 1;

    CounterRng rng(seed);
    std::set<std::vector<NodeId>> seen;
    const std::size_t budget = constraints.attempts_per_route * n;
    std::size_t attempts = 0;
    while (result.routes.size() < n && attempts < budget) {
        ++attempts;
        auto start = static_cast<NodeId>(rng.below(g.size()));
        std::vector<int> dist = hop_distances(g, start, max_hops);
        std::vector<NodeId> candidates;
        for (std::size_t v = 0; v < dist.size(); ++v) {
            if (dist[v] >= min_hops && dist[v] <= max_hops && goals[v] >= 0) {
                candidates.push_back(static_cast<NodeId>(v));
            }
        }
        if (candidates.empty()) continue;
        NodeId end = candidates[rng.below(candidates.size())];
        std::vector<NodeId> path = shortest_path(g, start, end);
        if (count_intersections(g, path) < constraints.min_intersections) continue;
        if (!seen.insert(path).second) continue;
        Route r;
        char id[32];
        std::snprintf(id, sizeof id, "route_%05zu", result.routes.size());
        r.route_id = id;
        r.node_ids = std::move(path);
        r.goal_poi = map.pois[static_cast<std::size_t>(goals[static_cast<std::size_t>(end)])].id;
        r.seed = seed;
        result.routes.push_back(std::move(r));
    }
    if (result.routes.size() < n) {
        result.warnings.push_back("attempt budget exhausted: sampled " +
                                  std::to_string(result.routes.size()) + " of " + std::to_string(n) +
                                  " routes");
    }
    return result;
}

std::vector<std::string> check_route(const StreetGraph& g, const osm::MapData& map, const Route& route,
                                     const RouteConstraints& constraints) {
    std::vector<std::string> problems;
    const auto& ids = route.node_ids;
    if (ids.size() < constraints.min_nodes || ids.size() > constraints.max_nodes) {
        problems.push_back("length " + std::to_string(ids.size()) + " outside bounds");
    }
    for (NodeId id : ids) {
        if (!g.contains(id)) {
            problems.push_back("unknown node " + std::to_string(id));
            return problems;
        }
    }
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        if (!g.adjacent(ids[i], ids[i + 1])) problems.push_back("consecutive nodes not adjacent");
    }
    if (!ids.empty() && shortest_path(g, ids.front(), ids.back()) != ids) {
        problems.push_back("not the canonical shortest path");
    }
    if (count_intersections(g, ids) < constraints.min_intersections) {
        problems.push_back("too few intersections");
    }
    auto poi = std::find_if(map.pois.begin(), map.pois.end(),
                            [&](const osm::Poi& p) { return p.id == route.goal_poi; });
    if (poi == map.pois.end()) {
        problems.push_back("unknown goal poi");
    } else if (!ids.empty() &&
               poi_distance(map, *poi, g.node(ids.back()).position) > constraints.goal_radius) {
        problems.push_back("goal poi outside goal radius");
    }
    return problems;
}

nlohmann::ordered_json to_json(const StreetGraph& g) {
    nlohmann::ordered_json j;
    j["schema"] = "map2seq.street_graph/1";
    j["spacing"] = g.spacing();
    j["projection_origin"] = {g.projection_origin().lat, g.projection_origin().lon};
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes()) {
        nodes.push_back({n.id, n.position.x, n.position.y, n.traffic_signal});
    }
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes()) {
        for (NodeId v : g.neighbors(n.id)) {
            if (n.id < v) edges.push_back({n.id, v});
        }
    }
    j["edges"] = std::move(edges);
    return j;
}

StreetGraph street_graph_from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string{}) != "map2seq.street_graph/1") {
        throw SchemaError("street graph json: unexpected schema");
    }
    std::vector<SegmentNode> nodes;
    for (const auto& n : j.at("nodes")) {
        nodes.push_back({n.at(0).get<NodeId>(), {n.at(1).get<double>(), n.at(2).get<double>()},
                         n.at(3).get<bool>()});
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id != static_cast<NodeId>(i)) throw SchemaError("street graph json: ids not dense");
    }
    std::vector<std::vector<NodeId>> adj(nodes.size());
    for (const auto& e : j.at("edges")) {
        auto a = e.at(0).get<NodeId>(), b = e.at(1).get<NodeId>();
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= nodes.size() ||
            static_cast<std::size_t>(b) >= nodes.size()) {
            throw SchemaError("street graph json: edge references unknown node");
        }
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    const auto& o = j.at("projection_origin");
    return StreetGraph(std::move(nodes), std::move(adj), {o.at(0).get<double>(), o.at(1).get<double>()},
                       j.at("spacing").get<double>());
}

nlohmann::ordered_json to_json(const Route& r) {
    nlohmann::ordered_json j;
    j["route_id"] = r.route_id;
    j["node_ids"] = r.node_ids;
    j["goal_poi_id"] = r.goal_poi;
    j["seed"] = r.seed;
    return j;
}

Route route_from_json(const nlohmann::json& j) {
    Route r;
    r.route_id = j.at("route_id").get<std::string>();
    r.node_ids = j.at("node_ids").get<std::vector<NodeId>>();
    r.goal_poi = j.at("goal_poi_id").get<osm::OsmId>();
    r.seed = j.value("seed", std::uint64_t{0});
    return r;
}

}  // namespace map2seq::streets
