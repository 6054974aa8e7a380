#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "map2seq/route_graph.hpp"
#include "map2seq/street_graph.hpp"

namespace map2seq::eval {

inline constexpr double kSuccessRadiusM = 25.0;
inline constexpr double kSecondsPerNode = 1.3;
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// mteval-v13a tokenization as done by SacreBLEU: unescapes a few XML
// entities, splits off punctuation (keeping '-', '.' and ',' between digits
// attached) and splits on whitespace.
std::vector<std::string> tokenize_13a(std::string_view text);

// ASCII lowercasing; non-ASCII bytes pass through unchanged.
std::string lowercase(std::string_view text);

struct BleuStats {
    double score = 0;
    double brevity_penalty = 1;
    std::size_t sys_len = 0;
    std::size_t ref_len = 0;
    std::vector<std::size_t> correct;  // per n-gram order
    std::vector<std::size_t> total;
    std::vector<double> precisions;    // percent
};

// Corpus BLEU-4 over lowercased 13a tokens with exponential smoothing for
// orders without matches. Throws ShapeError on unequal list sizes and
// DegenerateInputError on an empty corpus.
BleuStats corpus_bleu(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references);
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

// Number of 13a tokens.
std::size_t instruction_length(std::string_view text);

// Text view of one POI of a route graph.
struct PoiText {
    osm::OsmId osm_id = 0;
    std::vector<std::string> name_words;                       // in name order
    std::vector<std::pair<std::string, std::string>> tags;     // non-name key/value pairs
};

std::vector<PoiText> poi_texts(const routegraph::RouteGraph& graph);

// True when the instruction mentions the POI: every word of its name (ignoring
// pure punctuation) occurs among the lowercased 13a tokens, or, for unnamed
// POIs, some tag value word of at least four characters does.
bool mentions(const std::vector<std::string>& instruction_tokens, const PoiText& poi);

// Distinct route-graph POIs mentioned by the instruction.
std::size_t landmarks(std::string_view instruction, const routegraph::RouteGraph& graph);
std::vector<osm::OsmId> mentioned_pois(std::string_view instruction, const routegraph::RouteGraph& graph);

// Meters along shortest_path(g, a, b); kUnreachable across components.
double node_distance(const streets::StreetGraph& g, streets::NodeId a, streets::NodeId b);

// node_distance(v, target) for every node v, in one sweep.
std::vector<double> distances_to(const streets::StreetGraph& g, streets::NodeId target);

struct NavTrace {
    std::string route_id;
    std::vector<streets::NodeId> visited_node_ids;
    double duration_s = 0;
    bool stopped = false;
    streets::NodeId stop_node_id = -1;

    friend bool operator==(const NavTrace&, const NavTrace&) = default;
};

// Invariant violations of a trace against its street graph.
std::vector<std::string> check_trace(const NavTrace& trace, const streets::StreetGraph& g);

nlohmann::ordered_json to_json(const NavTrace& t);
NavTrace trace_from_json(const nlohmann::json& j);
std::vector<NavTrace> read_traces(const std::string& path);
void write_traces(const std::string& path, const std::vector<NavTrace>& traces);

// Minimum-cost monotone alignment of q and r under node_distance. Throws
// DegenerateInputError when either sequence is empty.
double dtw(const streets::StreetGraph& g, const std::vector<streets::NodeId>& q,
           const std::vector<streets::NodeId>& r);
double ndtw(const streets::StreetGraph& g, const std::vector<streets::NodeId>& q,
            const std::vector<streets::NodeId>& r);

// 1 when the run was stopped within kSuccessRadiusM (planar) of the goal.
int success(const NavTrace& trace, const streets::Route& route, const streets::StreetGraph& g);
double sdtw(const NavTrace& trace, const streets::Route& route, const streets::StreetGraph& g);

double expected_duration(std::size_t route_nodes);
// S * expected / duration, not capped at 1. Throws DegenerateInputError for
// a non-positive duration.
double snt_contribution(int success, std::size_t route_nodes, double duration_s);
double snt(const std::vector<NavTrace>& traces, const std::vector<streets::Route>& routes,
           const streets::StreetGraph& g);

struct TagScore {
    std::string tag;  // "key:value"
    double score = 0;
    std::size_t mentioned = 0;
    std::size_t present = 0;
};

// Per tag: instructions mentioning a POI with the tag over graphs containing
// one. Sorted by descending score, then tag.
std::vector<TagScore> landmark_type_scores(const std::vector<std::string>& instructions,
                                           const std::vector<routegraph::RouteGraph>& graphs);

struct Bucket {
    std::string property;  // "nodes", "intersections" or "turns"
    std::size_t value = 0;
    std::size_t runs = 0;
    std::size_t successes = 0;
    double rate = 0;
};

// Success rate grouped by route node count, intersection count and turn
// count. Only non-empty buckets are listed.
std::vector<Bucket> success_by_complexity(const std::vector<NavTrace>& traces,
                                          const std::vector<streets::Route>& routes,
                                          const streets::StreetGraph& g);

struct InstanceScores {
    std::string route_id;
    std::size_t length = 0;
    std::size_t landmarks = 0;
    std::optional<int> success;
    std::optional<double> sdtw;
    std::optional<double> snt;
};

struct EvalResult {
    std::size_t instances = 0;
    double bleu = 0;
    double length = 0;
    double landmarks = 0;
    std::optional<double> success_rate;
    std::optional<double> sdtw;
    std::optional<double> snt;
    std::vector<InstanceScores> per_instance;
};

struct EvalInput {
    std::vector<std::string> hypotheses;
    std::vector<std::string> references;            // empty: BLEU is skipped
    std::vector<routegraph::RouteGraph> graphs;      // aligned with hypotheses
    std::vector<NavTrace> traces;                    // empty: navigation metrics skipped
    std::vector<streets::Route> routes;              // aligned with traces
    const streets::StreetGraph* street_graph = nullptr;
};

EvalResult evaluate(const EvalInput& input);

nlohmann::ordered_json to_json(const EvalResult& r);
std::string to_csv(const EvalResult& r);

}  // namespace map2seq::eval
