#include "map2seq/route_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "map2seq/errors.hpp"

namespace map2seq::routegraph {
namespace {

constexpr std::array<std::string_view, kNodeTypeCount> kTypeTokens{
    "<street>", "<poi>", "<tag_key>", "<tag_value>",
    "<k_name_1>", "<k_name_2>", "<k_name_3>", "<k_name_4+>"};

std::uint64_t pack(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
}

std::int64_t to_cell(double v, double size) { return static_cast<std::int64_t>(std::floor(v / size)); }

int label_for(const geo::PlanePoint& from, const geo::PlanePoint& to, double dir) {
    if (geo::distance(from, to) < 1e-9) return 0;
    return geo::stable_angle_bin(relative_angle(from, to, dir)).index;
}

}  // namespace

std::string_view type_token(NodeType t) { return kTypeTokens[static_cast<std::size_t>(t)]; }

NodeType type_from_token(std::string_view token) {
    for (std::size_t i = 0; i < kTypeTokens.size(); ++i) {
        if (kTypeTokens[i] == token) return static_cast<NodeType>(i);
    }
    throw SchemaError("unknown node type " + std::string(token));
}

NodeType name_type(std::size_t position) {
    if (position == 0) throw OutOfRangeError("name positions are 1-based");
    return static_cast<NodeType>(static_cast<std::size_t>(NodeType::kName1) + std::min<std::size_t>(position, 4) - 1);
}

bool is_name_type(NodeType t) { return t >= NodeType::kName1; }

std::string position_token(std::size_t position) { return "<" + std::to_string(position) + ">"; }

std::vector<int> RouteGraph::poi_nodes() const {
    std::vector<int> out;
    for (const auto& n : nodes) {
        if (n.type == NodeType::kPoi) out.push_back(n.id);
    }
    return out;
}

VisibilityIndex::VisibilityIndex(const osm::MapData& map, double cell_size)
    : map_(&map), cell_size_(cell_size) {
    auto add_box = [&](double min_x, double min_y, double max_x, double max_y, auto member, std::size_t idx) {
        for (auto cx = to_cell(min_x, cell_size_); cx <= to_cell(max_x, cell_size_); ++cx) {
            for (auto cy = to_cell(min_y, cell_size_); cy <= to_cell(max_y, cell_size_); ++cy) {
                (cells_[pack(cx, cy)].*member).push_back(idx);
            }
        }
    };
    poi_points_.reserve(map.pois.size());
    for (std::size_t i = 0; i < map.pois.size(); ++i) {
        const auto& poi = map.pois[i];
        poi_points_.push_back(map.to_plane(poi.location));
        const auto& pts = poi.area ? poi.area->vertices : std::vector<geo::PlanePoint>{poi_points_.back()};
        double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
        for (const auto& p : pts) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        add_box(min_x, min_y, max_x, max_y, &Cell::pois, i);
    }
    for (std::size_t i = 0; i < map.buildings.size(); ++i) {
        const auto& pts = map.buildings[i].vertices;
        double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
        for (const auto& p : pts) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        add_box(min_x, min_y, max_x, max_y, &Cell::buildings, i);
    }
}

const VisibilityIndex::Cell* VisibilityIndex::cell(std::int64_t cx, std::int64_t cy) const {
    auto it = cells_.find(pack(cx, cy));
    return it == cells_.end() ? nullptr : &it->second;
}

std::vector<std::size_t> VisibilityIndex::buildings_near(const geo::PlanePoint& a,
                                                         const geo::PlanePoint& b) const {
    std::vector<std::size_t> out;
    for (auto cx = to_cell(std::min(a.x, b.x), cell_size_); cx <= to_cell(std::max(a.x, b.x), cell_size_); ++cx) {
        for (auto cy = to_cell(std::min(a.y, b.y), cell_size_); cy <= to_cell(std::max(a.y, b.y), cell_size_);
             ++cy) {
            if (const Cell* c = cell(cx, cy)) out.insert(out.end(), c->buildings.begin(), c->buildings.end());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<VisiblePoi> VisibilityIndex::visible_pois(const geo::PlanePoint& at, double radius) const {
    if (!(radius > 0)) throw ConfigError("visible_pois: radius must be positive");
    std::vector<std::size_t> candidates;
    for (auto cx = to_cell(at.x - radius, cell_size_); cx <= to_cell(at.x + radius, cell_size_); ++cx) {
        for (auto cy = to_cell(at.y - radius, cell_size_); cy <= to_cell(at.y + radius, cell_size_); ++cy) {
            if (const Cell* c = cell(cx, cy)) candidates.insert(candidates.end(), c->pois.begin(), c->pois.end());
        }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::vector<VisiblePoi> out;
    for (std::size_t i : candidates) {
        const osm::Poi& poi = map_->pois[i];
        geo::PlanePoint sight =
            poi.area ? geo::closest_point_on_polygon(at, *poi.area) : poi_points_[i];
        double d = (poi.area && geo::point_strictly_inside(at, *poi.area)) ? 0.0 : geo::distance(at, sight);
        if (d > radius) continue;
        std::vector<geo::Polygon> near;
        for (std::size_t b : buildings_near(at, sight)) near.push_back(map_->buildings[b]);
        if (geo::segment_blocked(at, sight, near)) continue;
        out.push_back({i, sight});
    }
    return out;
}

std::vector<VisiblePoi> visible_pois(const geo::PlanePoint& segment, const osm::MapData& map, double radius) {
    return VisibilityIndex(map).visible_pois(segment, radius);
}

double relative_angle(const geo::PlanePoint& from, const geo::PlanePoint& to, double route_dir_deg) {
    if (!std::isfinite(route_dir_deg)) throw OutOfRangeError("relative_angle: route direction not finite");
    return geo::wrap_degrees(geo::bearing(from, to) - route_dir_deg);
}

RouteGraph build_route_graph(const streets::Route& route, const streets::StreetGraph& g,
                             const osm::MapData& map, const BuildOptions& options) {
    return build_route_graph(route, g, VisibilityIndex(map), options);
}

RouteGraph build_route_graph(const streets::Route& route, const streets::StreetGraph& g,
                             const VisibilityIndex& index, const BuildOptions& options) {
    const auto& ids = route.node_ids;
    if (ids.size() < 2) throw DegenerateInputError("build_route_graph: route needs at least two nodes");
    for (auto id : ids) {
        if (!g.contains(id)) {
            throw OutOfRangeError("build_route_graph: route node " + std::to_string(id) +
                                  " missing from street graph");
        }
    }
    const osm::MapData& map = index.map();
    auto pos = [&](streets::NodeId id) { return g.node(id).position; };

    RouteGraph out;
    out.route_id = route.route_id;
    out.route_node_ids = ids;

    // Street nodes: route, then neighbors in order of first adjacent route node.
    std::map<streets::NodeId, int> graph_id;
    std::vector<streets::NodeId> street_of;  // graph id -> street id
    std::vector<double> direction;           // reference heading per street graph node
    const std::size_t P = ids.size();
    for (std::size_t p = 0; p < P; ++p) {
        double dir = p == 0 ? geo::bearing(pos(ids[0]), pos(ids[1])) : geo::bearing(pos(ids[p - 1]), pos(ids[p]));
        graph_id[ids[p]] = static_cast<int>(street_of.size());
        street_of.push_back(ids[p]);
        direction.push_back(dir);
        std::string token = p + 1 == P ? std::string(kLastToken) : position_token(p + 1);
        out.nodes.push_back({static_cast<int>(p), NodeType::kStreet, token});
        if (g.node(ids[p]).traffic_signal) out.signal_positions.push_back(p);
    }
    for (std::size_t p = 0; p < P; ++p) {
        for (auto v : g.neighbors(ids[p])) {
            if (graph_id.count(v)) continue;
            int gid = static_cast<int>(street_of.size());
            graph_id[v] = gid;
            street_of.push_back(v);
            direction.push_back(direction[p]);
            out.nodes.push_back({gid, NodeType::kStreet, std::string(kNeighborToken)});
        }
    }

    std::set<GraphEdge> edges;
    for (std::size_t u = 0; u < street_of.size(); ++u) {
        for (auto v : g.neighbors(street_of[u])) {
            auto it = graph_id.find(v);
            if (it == graph_id.end()) continue;
            edges.insert({static_cast<int>(u), it->second,
                          label_for(pos(street_of[u]), pos(v), direction[u])});
        }
    }

    // Visibility from route segments; one poi node per POI, one labeled
    // edge per seeing segment.
    std::map<osm::OsmId, std::vector<std::pair<std::size_t, int>>> seen;  // poi id -> (route pos, label)
    std::map<osm::OsmId, std::size_t> poi_index;
    for (std::size_t p = 0; p < P; ++p) {
        for (const auto& vis : index.visible_pois(pos(ids[p]), options.visibility_radius)) {
            const auto& poi = map.pois[vis.poi_index];
            seen[poi.id].push_back({p, label_for(pos(ids[p]), vis.sight_point, direction[p])});
            poi_index[poi.id] = vis.poi_index;
        }
    }
    auto add_node = [&](NodeType type, std::string token) {
        int id = static_cast<int>(out.nodes.size());
        out.nodes.push_back({id, type, std::move(token)});
        return id;
    };
    std::vector<int> poi_node;
    for (const auto& [osm_id, sightings] : seen) {
        int pid = add_node(NodeType::kPoi, "<poi>");
        poi_node.push_back(pid);
        out.poi_ids.push_back(osm_id);
        for (const auto& [p, label] : sightings) edges.insert({pid, static_cast<int>(p), label});
    }
    std::size_t k = 0;
    for (const auto& [osm_id, sightings] : seen) {
        const osm::Poi& poi = map.pois[poi_index[osm_id]];
        int pid = poi_node[k++];
        for (const auto& tag : poi.tags) {
            if (tag.key == "name") continue;
            int key = add_node(NodeType::kTagKey, tag.key);
            int value = add_node(NodeType::kTagValue, tag.value);
            edges.insert({value, key, kUnlabeled});
            edges.insert({key, pid, kUnlabeled});
        }
        std::vector<int> names;
        for (std::size_t w = 0; w < poi.name_words.size(); ++w) {
            names.push_back(add_node(name_type(w + 1), poi.name_words[w]));
            edges.insert({names.back(), pid, kUnlabeled});
        }
        for (int a : names) {
            for (int b : names) {
                if (a != b) edges.insert({a, b, kUnlabeled});
            }
        }
    }
    out.edges.assign(edges.begin(), edges.end());
    return out;
}

std::vector<std::string> check_graph(const RouteGraph& g) {
    std::vector<std::string> problems;
    const std::size_t P = g.route_node_ids.size();
    if (P == 0) problems.push_back("graph has no route");
    if (g.nodes.size() < P) {
        problems.push_back("fewer nodes than route positions");
        return problems;
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].id != static_cast<int>(i)) problems.push_back("node ids not dense");
    }
    for (std::size_t p = 0; p < P; ++p) {
        std::string want = p + 1 == P ? std::string(kLastToken) : position_token(p + 1);
        if (g.nodes[p].type != NodeType::kStreet || g.nodes[p].token != want) {
            problems.push_back("route node " + std::to_string(p) + " has token " + g.nodes[p].token);
        }
    }
    std::set<std::pair<int, int>> pairs;
    std::vector<int> value_out(g.nodes.size(), 0);
    std::size_t poi_count = 0;
    for (const auto& n : g.nodes) poi_count += n.type == NodeType::kPoi;
    if (poi_count != g.poi_ids.size()) problems.push_back("poi id list does not match poi nodes");
    for (const auto& e : g.edges) {
        if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= g.nodes.size() ||
            static_cast<std::size_t>(e.dst) >= g.nodes.size()) {
            problems.push_back("edge references unknown node");
            continue;
        }
        if (!pairs.insert({e.src, e.dst}).second) problems.push_back("duplicate edge");
        NodeType ts = g.nodes[static_cast<std::size_t>(e.src)].type;
        NodeType td = g.nodes[static_cast<std::size_t>(e.dst)].type;
        bool geometric = td == NodeType::kStreet && (ts == NodeType::kStreet || ts == NodeType::kPoi);
        if (geometric != e.labeled()) problems.push_back("edge label does not match node types");
        if (e.label < 0 || e.label > kUnlabeled) problems.push_back("edge label out of range");
        if (ts == NodeType::kTagValue) ++value_out[static_cast<std::size_t>(e.src)];
    }
    for (const auto& n : g.nodes) {
        if (n.type == NodeType::kTagValue && value_out[static_cast<std::size_t>(n.id)] != 1) {
            problems.push_back("tag value node without exactly one outgoing edge");
        }
    }
    for (std::size_t p = 0; p + 1 < P; ++p) {
        if (!pairs.count({static_cast<int>(p), static_cast<int>(p + 1)}) ||
            !pairs.count({static_cast<int>(p + 1), static_cast<int>(p)})) {
            problems.push_back("route positions " + std::to_string(p) + "/" + std::to_string(p + 1) +
                               " not connected");
        }
    }
    return problems;
}

nlohmann::ordered_json serialize(const RouteGraph& g) {
    nlohmann::ordered_json j;
    j["schema"] = kGraphSchema;
    j["route_id"] = g.route_id;
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) {
        nlohmann::ordered_json node;
        node["id"] = n.id;
        node["type"] = type_token(n.type);
        node["token"] = n.token;
        nodes.push_back(std::move(node));
    }
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) {
        nlohmann::ordered_json edge;
        edge["src"] = e.src;
        edge["dst"] = e.dst;
        edge["label"] = e.labeled() ? nlohmann::ordered_json(e.label) : nlohmann::ordered_json(nullptr);
        edges.push_back(std::move(edge));
    }
    j["edges"] = std::move(edges);
    j["route_node_ids"] = g.route_node_ids;
    j["poi_ids"] = g.poi_ids;
    j["signal_positions"] = g.signal_positions;
    return j;
}

RouteGraph deserialize(const nlohmann::json& record) {
    if (record.value("schema", std::string{}) != kGraphSchema) {
        throw SchemaError("route graph: expected schema " + std::string(kGraphSchema));
    }
    RouteGraph g;
    g.route_id = record.at("route_id").get<std::string>();
    for (const auto& n : record.at("nodes")) {
        g.nodes.push_back({n.at("id").get<int>(), type_from_token(n.at("type").get<std::string>()),
                           n.at("token").get<std::string>()});
    }
    for (const auto& e : record.at("edges")) {
        const auto& label = e.at("label");
        g.edges.push_back({e.at("src").get<int>(), e.at("dst").get<int>(),
                           label.is_null() ? kUnlabeled : label.get<int>()});
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.route_node_ids = record.at("route_node_ids").get<std::vector<streets::NodeId>>();
    g.poi_ids = record.value("poi_ids", std::vector<osm::OsmId>{});
    g.signal_positions = record.value("signal_positions", std::vector<std::size_t>{});
    auto problems = check_graph(g);
    if (!problems.empty()) throw SchemaError("route graph " + g.route_id + ": " + problems.front());
    return g;
}

GraphStats graph_stats(const std::vector<RouteGraph>& graphs) {
    GraphStats s;
    if (graphs.empty()) return s;
    std::unordered_set<std::string> tokens;
    for (const auto& g : graphs) {
        s.mean_nodes += static_cast<double>(g.nodes.size());
        s.mean_edges_per_node += static_cast<double>(g.edges.size()) / static_cast<double>(g.nodes.size());
        for (const auto& n : g.nodes) tokens.insert(n.token);
    }
    s.mean_nodes /= static_cast<double>(graphs.size());
    s.mean_edges_per_node /= static_cast<double>(graphs.size());
    s.distinct_tokens = tokens.size();
    return s;
}

}  // namespace map2seq::routegraph
