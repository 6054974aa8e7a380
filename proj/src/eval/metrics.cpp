#include "map2seq/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "map2seq/errors.hpp"
#include "map2seq/jsonl.hpp"

namespace map2seq::eval {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Characters that mteval-v13a pads with spaces unconditionally.
bool is_split_punct(char c) {
    auto u = static_cast<unsigned char>(c);
    return (u >= 0x7B && u <= 0x7E) || (u >= 0x5B && u <= 0x60) || (u >= 0x20 && u <= 0x26) ||
           (u >= 0x28 && u <= 0x2B) || (u >= 0x3A && u <= 0x40) || c == '/';
}

// Python str.split() separators within ASCII.
bool is_space(char c) {
    auto u = static_cast<unsigned char>(c);
    return c == ' ' || (u >= 0x09 && u <= 0x0D) || (u >= 0x1C && u <= 0x1F);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

// Left-to-right, non-overlapping substitution of a two-character pattern,
// the way re.sub scans.
template <class First, class Second, class Emit>
std::string substitute_pairs(const std::string& s, First first, Second second, Emit emit) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && first(s[i]) && second(s[i + 1])) {
            emit(out, s[i], s[i + 1]);
            i += 2;
        } else {
            out += s[i++];
        }
    }
    return out;
}

std::vector<std::string> split_whitespace(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string rstrip(std::string_view s) {
    std::size_t end = s.size();
    while (end > 0 && is_space(s[end - 1])) --end;
    return std::string(s.substr(0, end));
}

std::vector<std::string> bleu_tokens(std::string_view text) {
    return tokenize_13a(rstrip(lowercase(text)));
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

double my_log(double x) { return x == 0.0 ? -9999999999.0 : std::log(x); }

bool has_word_char(const std::string& token) {
    return std::any_of(token.begin(), token.end(), [](char c) {
        auto u = static_cast<unsigned char>(c);
        return u >= 0x80 || std::isalnum(u);
    });
}

std::vector<std::string> value_words(const std::string& value) {
    std::string spaced = lowercase(value);
    for (char& c : spaced) {
        if (c == '_' || c == ';') c = ' ';
    }
    std::vector<std::string> out;
    for (auto& w : split_whitespace(spaced)) {
        if (w.size() >= 4) out.push_back(std::move(w));
    }
    return out;
}

void require_aligned(const std::vector<NavTrace>& traces, const std::vector<streets::Route>& routes) {
    if (traces.size() != routes.size()) {
        throw ShapeError("traces and routes differ in length: " + std::to_string(traces.size()) + " vs " +
                         std::to_string(routes.size()));
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (traces[i].route_id != routes[i].route_id) {
            throw SchemaError("trace " + std::to_string(i) + " is for route '" + traces[i].route_id +
                              "' but the aligned route is '" + routes[i].route_id + "'");
        }
    }
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

std::string lowercase(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::vector<std::string> tokenize_13a(std::string_view text) {
    if (text.empty()) return {};
    std::string line(text);
    replace_all(line, "<skipped>", "");
    replace_all(line, "-\n", "");
    replace_all(line, "\n", " ");
    if (line.find('&') != std::string::npos) {
        replace_all(line, "&quot;", "\"");
        replace_all(line, "&amp;", "&");
        replace_all(line, "&lt;", "<");
        replace_all(line, "&gt;", ">");
    }
    std::string padded;
    padded.reserve(line.size() * 2 + 2);
    padded += ' ';
    for (char c : line) {
        if (is_split_punct(c)) {
            padded += ' ';
            padded += c;
            padded += ' ';
        } else {
            padded += c;
        }
    }
    padded += ' ';
    auto is_period_comma = [](char c) { return c == '.' || c == ','; };
    auto not_digit = [](char c) { return !is_digit(c); };
    padded = substitute_pairs(padded, not_digit, is_period_comma, [](std::string& o, char a, char b) {
        o += a;
        o += ' ';
        o += b;
        o += ' ';
    });
    padded = substitute_pairs(padded, is_period_comma, not_digit, [](std::string& o, char a, char b) {
        o += ' ';
        o += a;
        o += ' ';
        o += b;
    });
    padded = substitute_pairs(padded, is_digit, [](char c) { return c == '-'; },
                              [](std::string& o, char a, char b) {
                                  o += a;
                                  o += ' ';
                                  o += b;
                                  o += ' ';
                              });
    return split_whitespace(padded);
}

BleuStats corpus_bleu(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size()) {
        throw ShapeError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                         std::to_string(references.size()) + " references");
    }
    if (hypotheses.empty()) throw DegenerateInputError("bleu: empty corpus");
    constexpr std::size_t kOrder = 4;
    BleuStats st;
    st.correct.assign(kOrder, 0);
    st.total.assign(kOrder, 0);
    st.precisions.assign(kOrder, 0.0);
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        auto hyp = bleu_tokens(hypotheses[i]);
        auto ref = bleu_tokens(references[i]);
        st.sys_len += hyp.size();
        st.ref_len += ref.size();
        for (std::size_t n = 1; n <= kOrder; ++n) {
            NgramCounts h = ngrams(hyp, n);
            NgramCounts r = ngrams(ref, n);
            for (const auto& [gram, count] : h) {
                st.total[n - 1] += count;
                auto it = r.find(gram);
                if (it != r.end()) st.correct[n - 1] += std::min(count, it->second);
            }
        }
    }
    if (st.sys_len < st.ref_len) {
        st.brevity_penalty = st.sys_len > 0 ? std::exp(1.0 - static_cast<double>(st.ref_len) /
                                                                 static_cast<double>(st.sys_len))
                                            : 0.0;
    }
    if (std::all_of(st.correct.begin(), st.correct.end(), [](std::size_t c) { return c == 0; })) {
        st.score = 0.0;
        return st;
    }
    double smooth = 1.0;
    for (std::size_t n = 0; n < kOrder; ++n) {
        if (st.total[n] == 0) break;
        if (st.correct[n] == 0) {
            smooth *= 2;
            st.precisions[n] = 100.0 / (smooth * static_cast<double>(st.total[n]));
        } else {
            st.precisions[n] = 100.0 * static_cast<double>(st.correct[n]) / static_cast<double>(st.total[n]);
        }
    }
    double log_sum = 0;
    for (double p : st.precisions) log_sum += my_log(p);
    st.score = st.brevity_penalty * std::exp(log_sum / static_cast<double>(kOrder));
    return st;
}

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
    return corpus_bleu(hypotheses, references).score;
}

std::size_t instruction_length(std::string_view text) { return tokenize_13a(text).size(); }

std::vector<PoiText> poi_texts(const routegraph::RouteGraph& graph) {
    using routegraph::NodeType;
    std::vector<int> poi_nodes = graph.poi_nodes();
    std::unordered_map<int, std::size_t> slot;
    std::vector<PoiText> out(poi_nodes.size());
    for (std::size_t k = 0; k < poi_nodes.size(); ++k) {
        slot[poi_nodes[k]] = k;
        if (k < graph.poi_ids.size()) out[k].osm_id = graph.poi_ids[k];
    }
    std::unordered_map<int, int> value_of_key;
    for (const auto& e : graph.edges) {
        if (graph.nodes[static_cast<std::size_t>(e.src)].type == NodeType::kTagValue &&
            graph.nodes[static_cast<std::size_t>(e.dst)].type == NodeType::kTagKey) {
            value_of_key[e.dst] = e.src;
        }
    }
    // Edges are sorted by source, so name words arrive in node (word) order.
    for (const auto& e : graph.edges) {
        auto it = slot.find(e.dst);
        if (it == slot.end()) continue;
        const auto& src = graph.nodes[static_cast<std::size_t>(e.src)];
        PoiText& poi = out[it->second];
        if (routegraph::is_name_type(src.type)) {
            poi.name_words.push_back(src.token);
        } else if (src.type == NodeType::kTagKey) {
            auto v = value_of_key.find(e.src);
            std::string value = v == value_of_key.end() ? "" : graph.nodes[static_cast<std::size_t>(v->second)].token;
            poi.tags.emplace_back(src.token, value);
        }
    }
    return out;
}

bool mentions(const std::vector<std::string>& instruction_tokens, const PoiText& poi) {
    std::set<std::string> have(instruction_tokens.begin(), instruction_tokens.end());
    std::vector<std::string> name;
    for (const auto& w : poi.name_words) {
        for (auto& t : tokenize_13a(lowercase(w))) {
            if (has_word_char(t)) name.push_back(std::move(t));
        }
    }
    if (!name.empty()) {
        return std::all_of(name.begin(), name.end(), [&](const std::string& t) { return have.count(t) > 0; });
    }
    for (const auto& [key, value] : poi.tags) {
        for (const auto& w : value_words(value)) {
            if (have.count(w)) return true;
        }
    }
    return false;
}

std::vector<osm::OsmId> mentioned_pois(std::string_view instruction, const routegraph::RouteGraph& graph) {
    auto tokens = tokenize_13a(lowercase(instruction));
    std::vector<osm::OsmId> out;
    for (const auto& poi : poi_texts(graph)) {
        if (mentions(tokens, poi)) out.push_back(poi.osm_id);
    }
    return out;
}

std::size_t landmarks(std::string_view instruction, const routegraph::RouteGraph& graph) {
    return mentioned_pois(instruction, graph).size();
}

double node_distance(const streets::StreetGraph& g, streets::NodeId a, streets::NodeId b) {
    if (!g.contains(a) || !g.contains(b)) {
        throw OutOfRangeError("node_distance: unknown street node " + std::to_string(g.contains(a) ? b : a));
    }
    if (g.component(a) != g.component(b)) return kUnreachable;
    auto path = streets::shortest_path(g, a, b);
    // Summed from the goal backwards, matching distances_to bit for bit.
    double sum = 0;
    for (std::size_t k = path.size(); k-- > 1;) {
        sum = geo::distance(g.node(path[k - 1]).position, g.node(path[k]).position) + sum;
    }
    return sum;
}

std::vector<double> distances_to(const streets::StreetGraph& g, streets::NodeId target) {
    if (!g.contains(target)) throw OutOfRangeError("distances_to: unknown street node " + std::to_string(target));
    std::vector<int> hops = streets::hop_distances(g, target);
    std::vector<streets::NodeId> order;
    for (std::size_t v = 0; v < hops.size(); ++v) {
        if (hops[v] >= 0) order.push_back(static_cast<streets::NodeId>(v));
    }
    std::stable_sort(order.begin(), order.end(), [&](streets::NodeId x, streets::NodeId y) {
        return hops[static_cast<std::size_t>(x)] < hops[static_cast<std::size_t>(y)];
    });
    std::vector<double> out(g.size(), kUnreachable);
    out[static_cast<std::size_t>(target)] = 0.0;
    for (streets::NodeId v : order) {
        int h = hops[static_cast<std::size_t>(v)];
        if (h == 0) continue;
        for (streets::NodeId u : g.neighbors(v)) {
            if (hops[static_cast<std::size_t>(u)] == h - 1) {
                out[static_cast<std::size_t>(v)] =
                    geo::distance(g.node(v).position, g.node(u).position) + out[static_cast<std::size_t>(u)];
                break;
            }
        }
    }
    return out;
}

std::vector<std::string> check_trace(const NavTrace& trace, const streets::StreetGraph& g) {
    std::vector<std::string> problems;
    if (!(trace.duration_s > 0) || !std::isfinite(trace.duration_s)) {
        problems.push_back("duration_s must be positive and finite");
    }
    if (trace.visited_node_ids.empty()) problems.push_back("empty visited path");
    for (std::size_t i = 0; i < trace.visited_node_ids.size(); ++i) {
        streets::NodeId v = trace.visited_node_ids[i];
        if (!g.contains(v)) {
            problems.push_back("unknown street node " + std::to_string(v));
            continue;
        }
        if (i > 0) {
            streets::NodeId u = trace.visited_node_ids[i - 1];
            if (g.contains(u) && u != v && !g.adjacent(u, v)) {
                problems.push_back("no street edge " + std::to_string(u) + "-" + std::to_string(v));
            }
        }
    }
    if (trace.stopped && !g.contains(trace.stop_node_id)) {
        problems.push_back("stopped run has unknown stop node " + std::to_string(trace.stop_node_id));
    }
    return problems;
}

nlohmann::ordered_json to_json(const NavTrace& t) {
    nlohmann::ordered_json j;
    j["route_id"] = t.route_id;
    j["visited_node_ids"] = t.visited_node_ids;
    j["duration_s"] = t.duration_s;
    j["stopped"] = t.stopped;
    j["stop_node_id"] = t.stop_node_id;
    return j;
}

NavTrace trace_from_json(const nlohmann::json& j) {
    try {
        NavTrace t;
        t.route_id = j.at("route_id").get<std::string>();
        t.visited_node_ids = j.at("visited_node_ids").get<std::vector<streets::NodeId>>();
        t.duration_s = j.at("duration_s").get<double>();
        t.stopped = j.at("stopped").get<bool>();
        t.stop_node_id = j.at("stop_node_id").get<streets::NodeId>();
        if (!(t.duration_s > 0)) throw SchemaError("trace for '" + t.route_id + "' has non-positive duration_s");
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("navigation trace: ") + e.what());
    }
}

std::vector<NavTrace> read_traces(const std::string& path) {
    std::vector<NavTrace> out;
    for (const auto& j : read_jsonl(path)) out.push_back(trace_from_json(j));
    return out;
}

void write_traces(const std::string& path, const std::vector<NavTrace>& traces) {
    std::vector<nlohmann::ordered_json> records;
    for (const auto& t : traces) records.push_back(to_json(t));
    write_jsonl(path, records);
}

double dtw(const streets::StreetGraph& g, const std::vector<streets::NodeId>& q,
           const std::vector<streets::NodeId>& r) {
    if (q.empty() || r.empty()) throw DegenerateInputError("dtw: empty sequence");
    std::map<streets::NodeId, std::vector<double>> to;
    for (streets::NodeId v : r) {
        if (!to.count(v)) to.emplace(v, distances_to(g, v));
    }
    for (streets::NodeId v : q) {
        if (!g.contains(v)) throw OutOfRangeError("dtw: unknown street node " + std::to_string(v));
    }
    const std::size_t n = q.size();
    const std::size_t m = r.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            double cost = to.at(r[j - 1])[static_cast<std::size_t>(q[i - 1])];
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double ndtw(const streets::StreetGraph& g, const std::vector<streets::NodeId>& q,
            const std::vector<streets::NodeId>& r) {
    return std::exp(-dtw(g, q, r) / (static_cast<double>(r.size()) * kSuccessRadiusM));
}

int success(const NavTrace& trace, const streets::Route& route, const streets::StreetGraph& g) {
    if (!trace.stopped || route.node_ids.empty()) return 0;
    if (!g.contains(trace.stop_node_id)) return 0;
    double d = geo::distance(g.node(trace.stop_node_id).position, g.node(route.node_ids.back()).position);
    return d <= kSuccessRadiusM ? 1 : 0;
}

double sdtw(const NavTrace& trace, const streets::Route& route, const streets::StreetGraph& g) {
    if (!success(trace, route, g)) return 0.0;
    return ndtw(g, trace.visited_node_ids, route.node_ids);
}

double expected_duration(std::size_t route_nodes) { return kSecondsPerNode * static_cast<double>(route_nodes); }

double snt_contribution(int success, std::size_t route_nodes, double duration_s) {
    if (!(duration_s > 0)) {
        throw DegenerateInputError("snt: navigation duration must be positive, got " + std::to_string(duration_s));
    }
    return success ? expected_duration(route_nodes) / duration_s : 0.0;
}

double snt(const std::vector<NavTrace>& traces, const std::vector<streets::Route>& routes,
           const streets::StreetGraph& g) {
    require_aligned(traces, routes);
    std::vector<double> values;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        values.push_back(snt_contribution(success(traces[i], routes[i], g), routes[i].node_ids.size(),
                                          traces[i].duration_s));
    }
    return mean(values);
}

std::vector<TagScore> landmark_type_scores(const std::vector<std::string>& instructions,
                                           const std::vector<routegraph::RouteGraph>& graphs) {
    if (instructions.size() != graphs.size()) {
        throw ShapeError("landmark_type_scores: " + std::to_string(instructions.size()) + " instructions but " +
                         std::to_string(graphs.size()) + " graphs");
    }
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // tag -> (mentioned, present)
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        auto tokens = tokenize_13a(lowercase(instructions[i]));
        std::set<std::string> present, mentioned;
        for (const auto& poi : poi_texts(graphs[i])) {
            bool hit = mentions(tokens, poi);
            for (const auto& [k, v] : poi.tags) {
                std::string tag = k + ":" + v;
                present.insert(tag);
                if (hit) mentioned.insert(tag);
            }
        }
        for (const auto& t : present) ++counts[t].second;
        for (const auto& t : mentioned) ++counts[t].first;
    }
    std::vector<TagScore> out;
    for (const auto& [tag, c] : counts) {
        out.push_back({tag, static_cast<double>(c.first) / static_cast<double>(c.second), c.first, c.second});
    }
    std::stable_sort(out.begin(), out.end(), [](const TagScore& a, const TagScore& b) { return a.score > b.score; });
    return out;
}

std::vector<Bucket> success_by_complexity(const std::vector<NavTrace>& traces,
                                          const std::vector<streets::Route>& routes,
                                          const streets::StreetGraph& g) {
    require_aligned(traces, routes);
    std::map<std::pair<int, std::size_t>, std::pair<std::size_t, std::size_t>> acc;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& ids = routes[i].node_ids;
        int s = success(traces[i], routes[i], g);
        std::size_t keys[3] = {ids.size(), streets::count_intersections(g, ids), streets::count_turns(g, ids)};
        for (int p = 0; p < 3; ++p) {
            auto& a = acc[{p, keys[p]}];
            ++a.first;
            a.second += static_cast<std::size_t>(s);
        }
    }
    static const char* kNames[3] = {"nodes", "intersections", "turns"};
    std::vector<Bucket> out;
    for (const auto& [key, a] : acc) {
        out.push_back({kNames[key.first], key.second, a.first, a.second,
                       static_cast<double>(a.second) / static_cast<double>(a.first)});
    }
    return out;
}

EvalResult evaluate(const EvalInput& in) {
    EvalResult res;
    res.instances = in.hypotheses.size();
    if (!in.references.empty()) res.bleu = bleu(in.hypotheses, in.references);
    if (!in.graphs.empty() && in.graphs.size() != in.hypotheses.size()) {
        throw ShapeError("evaluate: " + std::to_string(in.hypotheses.size()) + " instructions but " +
                         std::to_string(in.graphs.size()) + " graphs");
    }
    std::vector<double> lengths, marks;
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < in.hypotheses.size(); ++i) {
        InstanceScores row;
        row.route_id = in.graphs.empty() ? std::to_string(i) : in.graphs[i].route_id;
        row.length = instruction_length(in.hypotheses[i]);
        if (!in.graphs.empty()) row.landmarks = landmarks(in.hypotheses[i], in.graphs[i]);
        lengths.push_back(static_cast<double>(row.length));
        marks.push_back(static_cast<double>(row.landmarks));
        row_of[row.route_id] = res.per_instance.size();
        res.per_instance.push_back(std::move(row));
    }
    res.length = mean(lengths);
    res.landmarks = mean(marks);
    if (!in.traces.empty()) {
        if (in.street_graph == nullptr) throw ConfigError("evaluate: navigation traces need a street graph");
        require_aligned(in.traces, in.routes);
        const auto& g = *in.street_graph;
        std::vector<double> sr, sd, sn;
        for (std::size_t i = 0; i < in.traces.size(); ++i) {
            int s = success(in.traces[i], in.routes[i], g);
            double d = sdtw(in.traces[i], in.routes[i], g);
            double t = snt_contribution(s, in.routes[i].node_ids.size(), in.traces[i].duration_s);
            sr.push_back(s);
            sd.push_back(d);
            sn.push_back(t);
            auto it = row_of.find(in.traces[i].route_id);
            if (it != row_of.end()) {
                auto& row = res.per_instance[it->second];
                row.success = s;
                row.sdtw = d;
                row.snt = t;
            }
        }
        res.success_rate = mean(sr);
        res.sdtw = mean(sd);
        res.snt = mean(sn);
    }
    return res;
}

nlohmann::ordered_json to_json(const EvalResult& r) {
    nlohmann::ordered_json j;
    j["instances"] = r.instances;
    j["bleu"] = r.bleu;
    j["length"] = r.length;
    j["landmarks"] = r.landmarks;
    if (r.success_rate) {
        j["success_rate"] = *r.success_rate;
        j["sdtw"] = *r.sdtw;
        j["snt"] = *r.snt;
    }
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : r.per_instance) {
        nlohmann::ordered_json o;
        o["route_id"] = row.route_id;
        o["length"] = row.length;
        o["landmarks"] = row.landmarks;
        if (row.success) {
            o["success"] = *row.success;
            o["sdtw"] = *row.sdtw;
            o["snt"] = *row.snt;
        }
        rows.push_back(std::move(o));
    }
    j["per_instance"] = std::move(rows);
    return j;
}

std::string to_csv(const EvalResult& r) {
    std::ostringstream out;
    out << "route_id,length,landmarks,success,sdtw,snt\n";
    char buf[64];
    for (const auto& row : r.per_instance) {
        out << row.route_id << ',' << row.length << ',' << row.landmarks << ',';
        if (row.success) {
            out << *row.success << ',';
            std::snprintf(buf, sizeof buf, "%.6f,%.6f", *row.sdtw, *row.snt);
            out << buf;
        } else {
            out << ",,";
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace map2seq::eval
