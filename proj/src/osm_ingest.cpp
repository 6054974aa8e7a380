#include "map2seq/osm_ingest.hpp"

#include <expat.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "map2seq/errors.hpp"

namespace map2seq::osm {
namespace {

struct RawWay {
    OsmId id = 0;
    std::vector<OsmId> refs;
    std::vector<OsmTag> tags;
};

struct RawNode {
    geo::GeoPoint pos;
    std::vector<OsmTag> tags;
};

enum class Scope { kNone, kNode, kWay, kOther };

struct ParseState {
    XML_Parser parser = nullptr;
    std::unordered_map<OsmId, geo::GeoPoint> coords;
    std::vector<OsmId> node_order;
    std::vector<std::pair<OsmId, RawNode>> tagged_nodes;
    std::vector<RawWay> ways;
    Scope scope = Scope::kNone;
    RawNode current_node;
    OsmId current_node_id = 0;
    RawWay current_way;
    std::string error;
};

const char* attr(const XML_Char** atts, const char* name) {
    for (int i = 0; atts[i]; i += 2) {
        if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
    }
    return nullptr;
}

void fail(ParseState& st, const std::string& what) {
    if (!st.error.empty()) return;
    std::ostringstream msg;
    msg << "line " << XML_GetCurrentLineNumber(st.parser) << ": " << what;
    st.error = msg.str();
    XML_StopParser(st.parser, XML_FALSE);
}

template <typename T>
bool parse_number(const char* s, T& out) {
    if (!s) return false;
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    in >> out;
    return !in.fail() && in.eof();
}

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** atts) {
    auto& st = *static_cast<ParseState*>(user);
    if (std::strcmp(name, "node") == 0) {
        OsmId id = 0;
        double lat = 0, lon = 0;
        if (!parse_number(attr(atts, "id"), id) || !parse_number(attr(atts, "lat"), lat) ||
            !parse_number(attr(atts, "lon"), lon)) {
            fail(st, "node element needs numeric id, lat and lon");
            return;
        }
        st.scope = Scope::kNode;
        st.current_node_id = id;
        st.current_node = RawNode{{lat, lon}, {}};
        if (st.coords.emplace(id, st.current_node.pos).second) st.node_order.push_back(id);
    } else if (std::strcmp(name, "way") == 0) {
        OsmId id = 0;
        if (!parse_number(attr(atts, "id"), id)) {
            fail(st, "way element needs a numeric id");
            return;
        }
        st.scope = Scope::kWay;
        st.current_way = RawWay{id, {}, {}};
    } else if (std::strcmp(name, "nd") == 0) {
        OsmId ref = 0;
        if (st.scope != Scope::kWay) return;
        if (!parse_number(attr(atts, "ref"), ref)) {
            fail(st, "nd element needs a numeric ref");
            return;
        }
        st.current_way.refs.push_back(ref);
    } else if (std::strcmp(name, "tag") == 0) {
        const char* k = attr(atts, "k");
        const char* v = attr(atts, "v");
        if (!k || !*k || !v) {
            fail(st, "tag element needs non-empty k and a v attribute");
            return;
        }
        if (st.scope == Scope::kNode) st.current_node.tags.push_back({k, v});
        if (st.scope == Scope::kWay) st.current_way.tags.push_back({k, v});
    } else if (std::strcmp(name, "relation") == 0) {
        // Relations (multipolygons) are not assembled.
        st.scope = Scope::kOther;
    }
}

void XMLCALL on_end(void* user, const XML_Char* name) {
    auto& st = *static_cast<ParseState*>(user);
    if (std::strcmp(name, "node") == 0 && st.scope == Scope::kNode) {
        if (!st.current_node.tags.empty()) {
            st.tagged_nodes.emplace_back(st.current_node_id, std::move(st.current_node));
        }
        st.scope = Scope::kNone;
    } else if (std::strcmp(name, "way") == 0 && st.scope == Scope::kWay) {
        st.ways.push_back(std::move(st.current_way));
        st.scope = Scope::kNone;
    } else if (std::strcmp(name, "relation") == 0) {
        st.scope = Scope::kNone;
    }
}

const std::string* find_tag(const std::vector<OsmTag>& tags, std::string_view key) {
    for (const auto& t : tags) {
        if (t.key == key) return &t.value;
    }
    return nullptr;
}

bool contains(const std::vector<std::string>& list, std::string_view s) {
    return std::find(list.begin(), list.end(), s) != list.end();
}

bool has_poi_key(const std::vector<OsmTag>& tags, const OsmConfig& config) {
    return std::any_of(tags.begin(), tags.end(),
                       [&](const OsmTag& t) { return contains(config.poi_keys, t.key); });
}

std::vector<std::string> names_of(const std::vector<OsmTag>& tags) {
    const std::string* name = find_tag(tags, "name");
    return name ? split_name(*name) : std::vector<std::string>{};
}

nlohmann::ordered_json geo_json(const geo::GeoPoint& p) { return nlohmann::ordered_json::array({p.lat, p.lon}); }

nlohmann::ordered_json ring_json(const geo::Polygon& poly) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& v : poly.vertices) arr.push_back({v.x, v.y});
    return arr;
}

geo::GeoPoint geo_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

geo::Polygon ring_from(const nlohmann::json& j) {
    geo::Polygon poly;
    for (const auto& v : j) poly.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return poly;
}

constexpr const char* kMapSchema = "map2seq.map/1";

}  // namespace

const std::string* Poi::tag(std::string_view key) const { return find_tag(tags, key); }

std::vector<std::string> split_name(std::string_view name) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : name) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

MapData parse_osm(std::istream& xml, const OsmConfig& config) {
    ParseState st;
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate(nullptr), &XML_ParserFree);
    st.parser = parser.get();
    XML_SetUserData(st.parser, &st);
    XML_SetElementHandler(st.parser, on_start, on_end);

    std::vector<char> buf(1 << 16);
    while (true) {
        xml.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::streamsize got = xml.gcount();
        bool last = got < static_cast<std::streamsize>(buf.size());
        if (XML_Parse(st.parser, buf.data(), static_cast<int>(got), last) == XML_STATUS_ERROR) {
            if (!st.error.empty()) throw ParseError("osm xml " + st.error);
            std::ostringstream msg;
            msg << "osm xml line " << XML_GetCurrentLineNumber(st.parser) << ": "
                << XML_ErrorString(XML_GetErrorCode(st.parser));
            throw ParseError(msg.str());
        }
        if (last) break;
    }

    MapData map;
    // Projection origin: centroid of every node in the file.
    double lat_sum = 0, lon_sum = 0;
    for (OsmId id : st.node_order) {
        lat_sum += st.coords[id].lat;
        lon_sum += st.coords[id].lon;
    }
    if (!st.node_order.empty()) {
        map.projection_origin = {lat_sum / static_cast<double>(st.node_order.size()),
                                 lon_sum / static_cast<double>(st.node_order.size())};
    }

    for (auto& [id, node] : st.tagged_nodes) {
        const std::string* hw = find_tag(node.tags, "highway");
        if (hw && *hw == "traffic_signals") map.traffic_signals.push_back(node.pos);
        if (has_poi_key(node.tags, config)) {
            Poi poi;
            poi.id = id;
            poi.location = node.pos;
            poi.name_words = names_of(node.tags);
            poi.tags = std::move(node.tags);
            map.pois.push_back(std::move(poi));
        }
    }

    for (const RawWay& way : st.ways) {
        std::vector<geo::GeoPoint> pts;
        pts.reserve(way.refs.size());
        for (OsmId ref : way.refs) {
            auto it = st.coords.find(ref);
            if (it == st.coords.end()) {
                throw ParseError("osm xml: way " + std::to_string(way.id) +
                                 " references missing node " + std::to_string(ref));
            }
            pts.push_back(it->second);
        }
        const bool closed = way.refs.size() >= 4 && way.refs.front() == way.refs.back();
        const std::string* hw = find_tag(way.tags, "highway");
        const std::string* area_tag = find_tag(way.tags, "area");
        bool is_area = closed && area_tag && *area_tag == "yes";
        if (hw && contains(config.highway_values, *hw) && !is_area && pts.size() >= 2) {
            map.street_polylines.push_back(pts);
            continue;
        }
        if (!closed) continue;
        geo::Polygon ring;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) ring.vertices.push_back(map.to_plane(pts[i]));
        if (find_tag(way.tags, "building")) map.buildings.push_back(ring);
        if (has_poi_key(way.tags, config)) {
            Poi poi;
            poi.id = way.id;
            double la = 0, lo = 0;
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                la += pts[i].lat;
                lo += pts[i].lon;
            }
            double n = static_cast<double>(pts.size() - 1);
            poi.location = {la / n, lo / n};
            poi.area = ring;
            poi.name_words = names_of(way.tags);
            poi.tags = way.tags;
            map.pois.push_back(std::move(poi));
        }
    }
    std::stable_sort(map.pois.begin(), map.pois.end(),
                     [](const Poi& a, const Poi& b) { return a.id < b.id; });
    return map;
}

MapData parse_osm_file(const std::string& path, const OsmConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return parse_osm(in, config);
}

ValidationReport validate(MapData& map, const OsmConfig& config) {
    ValidationReport report;

    std::vector<geo::Polygon> kept;
    for (std::size_t i = 0; i < map.buildings.size(); ++i) {
        if (geo::is_simple_polygon(map.buildings[i].vertices)) {
            kept.push_back(std::move(map.buildings[i]));
        } else {
            report.dropped_buildings.push_back("building #" + std::to_string(i) +
                                               ": self-intersecting or degenerate");
        }
    }
    map.buildings = std::move(kept);

    std::vector<std::vector<geo::GeoPoint>> streets;
    for (std::size_t s = 0; s < map.street_polylines.size(); ++s) {
        std::vector<geo::GeoPoint> pts;
        for (const auto& p : map.street_polylines[s]) {
            if (!pts.empty() && map.to_plane(pts.back()) == map.to_plane(p)) {
                report.collapsed_segments.push_back("street #" + std::to_string(s) +
                                                    ": zero-length segment after point " +
                                                    std::to_string(pts.size() - 1));
                continue;
            }
            pts.push_back(p);
        }
        if (pts.size() >= 2) streets.push_back(std::move(pts));
    }
    map.street_polylines = std::move(streets);

    std::vector<Poi> pois;
    for (auto& poi : map.pois) {
        if (!has_poi_key(poi.tags, config)) {
            report.dropped_pois.push_back("poi " + std::to_string(poi.id) + ": no allow-listed tag");
            continue;
        }
        if (poi.area && !geo::is_simple_polygon(poi.area->vertices)) {
            report.dropped_pois.push_back("poi " + std::to_string(poi.id) +
                                          ": self-intersecting area");
            continue;
        }
        pois.push_back(std::move(poi));
    }
    map.pois = std::move(pois);
    return report;
}

nlohmann::ordered_json to_json(const MapData& map) {
    nlohmann::ordered_json j;
    j["schema"] = kMapSchema;
    j["projection_origin"] = geo_json(map.projection_origin);
    auto streets = nlohmann::ordered_json::array();
    for (const auto& line : map.street_polylines) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& p : line) arr.push_back(geo_json(p));
        streets.push_back(std::move(arr));
    }
    j["streets"] = std::move(streets);
    auto pois = nlohmann::ordered_json::array();
    for (const auto& poi : map.pois) {
        nlohmann::ordered_json p;
        p["id"] = poi.id;
        p["location"] = geo_json(poi.location);
        p["area"] = poi.area ? ring_json(*poi.area) : nlohmann::ordered_json(nullptr);
        auto tags = nlohmann::ordered_json::array();
        for (const auto& t : poi.tags) tags.push_back({t.key, t.value});
        p["tags"] = std::move(tags);
        p["name_words"] = poi.name_words;
        pois.push_back(std::move(p));
    }
    j["pois"] = std::move(pois);
    auto buildings = nlohmann::ordered_json::array();
    for (const auto& b : map.buildings) buildings.push_back(ring_json(b));
    j["buildings"] = std::move(buildings);
    auto signals = nlohmann::ordered_json::array();
    for (const auto& s : map.traffic_signals) signals.push_back(geo_json(s));
    j["traffic_signals"] = std::move(signals);
    return j;
}

MapData map_from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string{}) != kMapSchema) {
        throw SchemaError("map json: expected schema " + std::string(kMapSchema));
    }
    MapData map;
    map.projection_origin = geo_from(j.at("projection_origin"));
    for (const auto& line : j.at("streets")) {
        std::vector<geo::GeoPoint> pts;
        for (const auto& p : line) pts.push_back(geo_from(p));
        map.street_polylines.push_back(std::move(pts));
    }
    for (const auto& p : j.at("pois")) {
        Poi poi;
        poi.id = p.at("id").get<OsmId>();
        poi.location = geo_from(p.at("location"));
        if (!p.at("area").is_null()) poi.area = ring_from(p.at("area"));
        for (const auto& t : p.at("tags")) {
            poi.tags.push_back({t.at(0).get<std::string>(), t.at(1).get<std::string>()});
        }
        poi.name_words = p.at("name_words").get<std::vector<std::string>>();
        map.pois.push_back(std::move(poi));
    }
    for (const auto& b : j.at("buildings")) map.buildings.push_back(ring_from(b));
    for (const auto& s : j.at("traffic_signals")) map.traffic_signals.push_back(geo_from(s));
    return map;
}

}  // namespace map2seq::osm
