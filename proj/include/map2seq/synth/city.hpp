#pragma once

// Synthetic grid city used as a bundled fixture and by the acceptance
// suite. Everything is generated in a local metric plane and only turned
// into latitude/longitude when written as OSM XML.

#include <cstdint>
#include <string>
#include <vector>

#include "map2seq/geodesy.hpp"
#include "map2seq/osm_ingest.hpp"

namespace map2seq::synth {

struct PlanarPoi {
    osm::OsmId id = 0;
    geo::PlanePoint location;
    std::vector<geo::PlanePoint> area;  // empty for point POIs
    std::vector<osm::OsmTag> tags;
};

struct PlanarCity {
    std::vector<geo::PlanePoint> street_points;
    std::vector<std::vector<std::size_t>> streets;  // indices into street_points
    std::vector<std::vector<osm::OsmTag>> street_tags;
    std::vector<std::size_t> signal_points;         // indices into street_points
    std::vector<std::vector<geo::PlanePoint>> buildings;
    std::vector<PlanarPoi> pois;
};

struct CityOptions {
    std::size_t blocks_x = 6;
    std::size_t blocks_y = 6;
    double block_m = 80.0;
    double poi_probability = 0.45;       // per candidate slot along a block side
    double building_probability = 0.6;   // per block side
    double hidden_poi_probability = 0.5; // POI behind a building
    double park_probability = 0.08;      // per block, replaces its buildings
    double signal_probability = 1.0;     // per junction
    std::uint64_t seed = 1;
};

PlanarCity make_city(const CityOptions& options);

// Rotation (counter-clockwise, degrees) about the plane origin followed by
// a translation.
PlanarCity transformed(const PlanarCity& city, double rotation_deg, geo::PlanePoint offset);

inline constexpr geo::GeoPoint kDefaultOrigin{40.75, -73.99};

std::string to_osm_xml(const PlanarCity& city, const geo::GeoPoint& origin = kDefaultOrigin);

}  // namespace map2seq::synth
