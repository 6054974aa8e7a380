#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "map2seq/jsonl.hpp"
#include "map2seq/route_graph.hpp"

namespace map2seq::rules {

// Surface string of a POI node: its name words, else the most specific tag
// value (cuisine, then amenity/shop/leisure/tourism, then any), with
// underscores read as spaces.
std::string poi_surface(const routegraph::RouteGraph& g, int poi_node);

// "left" / "right" for a bin by the side of its center; 0 and 180 go right.
std::string side_of_bin(int bin);
// "straight" for bin 0, otherwise side_of_bin.
std::string direction_of_bin(int bin);

struct RuleEvent {
    enum class Kind { kPoi, kJunction, kStop };
    Kind kind = Kind::kStop;
    std::size_t position = 0;  // 0-based route position
    std::string surface;       // POI surface, or "light"/"intersection"
    std::string direction;     // POI side, or junction exit direction
};

// Walks the route: each POI at its first visible segment with its side,
// each interior junction with its exit direction, then the stop.
std::vector<RuleEvent> rule_events(const routegraph::RouteGraph& g);

// Flattened events: "<surface> <side>" per POI, "light|intersection <dir>"
// per junction, then "stop". Depends only on the graph.
std::vector<std::string> generate_rule_based(const routegraph::RouteGraph& g);
std::string rule_based_text(const routegraph::RouteGraph& g);

struct PretrainingSet {
    std::vector<InstructionRecord> records;
    std::vector<std::string> warnings;
};

// `n` (route, rule text) pairs drawn by seeded permutation cycles.
PretrainingSet make_pretraining_set(const std::vector<routegraph::RouteGraph>& graphs, std::size_t n,
                                    std::uint64_t seed);

}  // namespace map2seq::rules
