#include "map2seq/rule_gen.hpp"

#include <algorithm>
#include <map>

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"

namespace map2seq::rules {

using routegraph::NodeType;
using routegraph::RouteGraph;

namespace {

std::string underscores_to_spaces(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

}  // namespace

std::string side_of_bin(int bin) {
    int center = 30 * bin;
    return (center > 180 && center < 360) ? "left" : "right";
}

std::string direction_of_bin(int bin) { return bin == 0 ? "straight" : side_of_bin(bin); }

std::string poi_surface(const RouteGraph& g, int poi_node) {
    std::vector<std::string> name;
    std::map<std::string, std::string> values;  // key token -> value token
    std::vector<std::string> key_order;
    for (const auto& e : g.edges) {
        if (e.dst != poi_node) continue;
        const auto& src = g.nodes[static_cast<std::size_t>(e.src)];
        if (routegraph::is_name_type(src.type)) {
            name.push_back(src.token);
        } else if (src.type == NodeType::kTagKey) {
            for (const auto& ve : g.edges) {
                if (ve.dst == e.src && g.nodes[static_cast<std::size_t>(ve.src)].type == NodeType::kTagValue) {
                    values.emplace(src.token, g.nodes[static_cast<std::size_t>(ve.src)].token);
                    key_order.push_back(src.token);
                }
            }
        }
    }
    if (!name.empty()) {
        std::string out;
        for (const auto& w : name) out += (out.empty() ? "" : " ") + w;
        return out;
    }
    for (const char* key : {"cuisine", "amenity", "shop", "leisure", "tourism"}) {
        auto it = values.find(key);
        if (it != values.end()) return underscores_to_spaces(it->second);
    }
    if (!key_order.empty()) return underscores_to_spaces(values[key_order.front()]);
    return "poi";
}

std::vector<RuleEvent> rule_events(const RouteGraph& g) {
    const std::size_t P = g.route_length();
    // First sighting of every POI: route position and label.
    std::map<int, std::pair<int, int>> first;  // poi node -> (position, label)
    std::vector<std::size_t> street_degree(P, 0);
    std::vector<int> exit_label(P, -1);
    for (const auto& e : g.edges) {
        const auto& src = g.nodes[static_cast<std::size_t>(e.src)];
        const auto& dst = g.nodes[static_cast<std::size_t>(e.dst)];
        if (src.type == NodeType::kPoi && static_cast<std::size_t>(e.dst) < P) {
            auto it = first.find(e.src);
            if (it == first.end() || e.dst < it->second.first) first[e.src] = {e.dst, e.label};
        }
        if (static_cast<std::size_t>(e.src) < P && dst.type == NodeType::kStreet) {
            ++street_degree[static_cast<std::size_t>(e.src)];
            if (e.dst == e.src + 1) exit_label[static_cast<std::size_t>(e.src)] = e.label;
        }
    }
    std::vector<std::vector<std::pair<int, int>>> at(P);  // position -> (poi node, label)
    for (const auto& [poi, seen] : first) at[static_cast<std::size_t>(seen.first)].push_back({poi, seen.second});

    std::vector<RuleEvent> out;
    for (std::size_t p = 0; p < P; ++p) {
        for (const auto& [poi, label] : at[p])
            out.push_back({RuleEvent::Kind::kPoi, p, poi_surface(g, poi), side_of_bin(label)});
        if (p > 0 && p + 1 < P && street_degree[p] > 2) {
            bool signal = std::find(g.signal_positions.begin(), g.signal_positions.end(), p) !=
                          g.signal_positions.end();
            out.push_back({RuleEvent::Kind::kJunction, p, signal ? "light" : "intersection",
                           direction_of_bin(exit_label[p])});
        }
    }
    out.push_back({RuleEvent::Kind::kStop, P == 0 ? 0 : P - 1, "stop", ""});
    return out;
}

std::vector<std::string> generate_rule_based(const RouteGraph& g) {
    std::vector<std::string> out;
    for (const auto& e : rule_events(g)) {
        out.push_back(e.surface);
        if (!e.direction.empty()) out.push_back(e.direction);
    }
    return out;
}


std::string rule_based_text(const RouteGraph& g) {
    std::string text;
    for (const auto& t : generate_rule_based(g)) text += (text.empty() ? "" : " ") + t;
    return text;
}

PretrainingSet make_pretraining_set(const std::vector<RouteGraph>& graphs, std::size_t n, std::uint64_t seed) {
    PretrainingSet set;
    if (n == 0) return set;
    if (graphs.empty()) throw ConfigError("make_pretraining_set: no graphs");
    if (n > graphs.size()) {
        set.warnings.push_back("requested " + std::to_string(n) + " instances from " +
                               std::to_string(graphs.size()) + " distinct routes; duplicates included");
    }
    std::vector<std::string> texts(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) texts[i] = rule_based_text(graphs[i]);
    CounterRng rng(seed);
    std::vector<std::size_t> order;
    while (set.records.size() < n) {
        order.resize(graphs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t i : order) {
            if (set.records.size() == n) break;
            set.records.push_back({graphs[i].route_id, texts[i]});
        }
    }
    return set;
}

}  // namespace map2seq::rules
