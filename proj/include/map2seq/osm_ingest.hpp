#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "map2seq/geodesy.hpp"

namespace map2seq::osm {

using OsmId = std::int64_t;

struct OsmTag {
    std::string key;
    std::string value;

    friend bool operator==(const OsmTag&, const OsmTag&) = default;
};

struct Poi {
    OsmId id = 0;
    // Node location, or the vertex mean for area POIs.
    geo::GeoPoint location;
    // Set for closed-way POIs, in the map's projected frame.
    std::optional<geo::Polygon> area;
    std::vector<OsmTag> tags;
    std::vector<std::string> name_words;

    const std::string* tag(std::string_view key) const;

    friend bool operator==(const Poi&, const Poi&) = default;
};

struct MapData {
    std::vector<std::vector<geo::GeoPoint>> street_polylines;
    std::vector<Poi> pois;
    std::vector<geo::Polygon> buildings;  // projected about projection_origin
    std::vector<geo::GeoPoint> traffic_signals;
    geo::GeoPoint projection_origin;

    geo::PlanePoint to_plane(const geo::GeoPoint& p) const {
        return geo::project(p, projection_origin);
    }

    friend bool operator==(const MapData&, const MapData&) = default;
};

struct OsmConfig {
    std::vector<std::string> highway_values{
        "motorway",     "trunk",          "primary",        "secondary",   "tertiary",
        "unclassified", "residential",    "living_street",  "pedestrian",  "primary_link",
        "secondary_link", "tertiary_link", "trunk_link"};
    std::vector<std::string> poi_keys{"amenity", "shop",    "leisure", "tourism",
                                      "cuisine", "historic", "office", "craft"};
};

// Whitespace tokenization of a `name` tag; punctuation stays inside words.
std::vector<std::string> split_name(std::string_view name);

// Streams OSM XML. Throws ParseError (with line number) on malformed XML
// and on `nd` references to nodes absent from the file. Polygons are
// returned unvalidated; run validate() before building graphs.
MapData parse_osm(std::istream& xml, const OsmConfig& config = {});
MapData parse_osm_file(const std::string& path, const OsmConfig& config = {});

struct ValidationReport {
    std::vector<std::string> dropped_buildings;
    std::vector<std::string> collapsed_segments;
    std::vector<std::string> dropped_pois;

    bool empty() const {
        return dropped_buildings.empty() && collapsed_segments.empty() && dropped_pois.empty();
    }
};

// Drops self-intersecting buildings and POI areas, collapses zero-length
// street segments and drops POIs without an allow-listed tag.
ValidationReport validate(MapData& map, const OsmConfig& config = {});

nlohmann::ordered_json to_json(const MapData& map);
MapData map_from_json(const nlohmann::json& j);

}  // namespace map2seq::osm
