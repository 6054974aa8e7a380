#include "map2seq/synth/city.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"

namespace map2seq::synth {

namespace {

using geo::PlanePoint;
using osm::OsmTag;

struct Kind {
    const char* key;
    const char* value;
    const char* name;     // nullptr for unnamed features
    const char* cuisine;  // nullptr when not applicable
};

constexpr Kind kNamed[] = {
    {"amenity", "cafe", "Starbucks Coffee", "coffee_shop"},
    {"amenity", "bank", "Citibank", nullptr},
    {"amenity", "bank", "Chase Bank", nullptr},
    {"amenity", "fast_food", "Dunkin Donuts", "donut"},
    {"amenity", "fast_food", "Chipotle", "mexican"},
    {"amenity", "restaurant", "Pizza Hut", "pizza"},
    {"tourism", "hotel", "Broadway Hotel", nullptr},
    {"shop", "shoes", "Nine West", nullptr},
    {"shop", "clothes", "Brooks Brothers", nullptr},
    {"amenity", "pharmacy", "Duane Reade", nullptr},
    {"shop", "convenience", "7-Eleven", nullptr},
    {"amenity", "restaurant", "TGI Fridays", "american"},
    {"shop", "books", "Barnes & Noble", nullptr},
    {"amenity", "cafe", "Bluestone Lane", "coffee_shop"},
    {"amenity", "pub", "The Dead Rabbit", nullptr},
    {"shop", "bakery", "Levain Bakery", nullptr},
    {"amenity", "restaurant", "Joe's Pizza", "pizza"},
    {"shop", "supermarket", "Whole Foods Market", nullptr},
    {"amenity", "cinema", "Angelika Film Center", nullptr},
    {"shop", "electronics", "Best Buy", nullptr},
    {"amenity", "fast_food", "Shake Shack", "burger"},
    {"amenity", "restaurant", "Carmine's", "italian"},
    {"amenity", "library", "Jefferson Market Library", nullptr},
    {"tourism", "museum", "Tenement Museum", nullptr},
    {"leisure", "fitness_centre", "Equinox", nullptr},
    {"amenity", "place_of_worship", "Saint Patrick's Church", nullptr},
    {"shop", "florist", "Roses Only", nullptr},
    {"shop", "hardware", "Home Depot", nullptr},
    {"amenity", "cafe", "Bubble Tea & Crepes", "bubble_tea"},
    {"amenity", "restaurant", "Olive Garden", "italian"},
    {"shop", "mobile_phone", "Verizon", nullptr},
    {"amenity", "bar", "Blue Note", nullptr},
};

constexpr Kind kUnnamed[] = {
    {"amenity", "fountain", nullptr, nullptr},
    {"leisure", "playground", nullptr, nullptr},
    {"amenity", "bicycle_rental", nullptr, nullptr},
    {"amenity", "post_office", nullptr, nullptr},
    {"amenity", "atm", nullptr, nullptr},
    {"amenity", "parking", nullptr, nullptr},
};

constexpr const char* kParkNames[] = {"Madison Square Park", "Union Square", "Bryant Park", "Washington Square Park"};

std::vector<OsmTag> tags_of(const Kind& k) {
    std::vector<OsmTag> tags{{k.key, k.value}};
    if (k.cuisine) tags.push_back({"cuisine", k.cuisine});
    if (k.name) tags.push_back({"name", k.name});
    return tags;
}

// Local frame of one block side: origin at a corner on the street, `along`
// running with the street, `inward` pointing into the block.
struct Side {
    PlanePoint origin, along, inward;
    PlanePoint at(double a, double l) const { return origin + along * a + inward * l; }
};

}  // namespace

PlanarCity make_city(const CityOptions& o) {
    if (o.blocks_x == 0 || o.blocks_y == 0 || !(o.block_m > 0)) throw ConfigError("city needs at least one block");
    PlanarCity city;
    CounterRng rng(o.seed);
    const double b = o.block_m;
    const std::size_t nx = o.blocks_x + 1, ny = o.blocks_y + 1;

    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            city.street_points.push_back({static_cast<double>(i) * b, static_cast<double>(j) * b});
    auto junction = [&](std::size_t i, std::size_t j) { return j * nx + i; };

    for (std::size_t j = 0; j < ny; ++j) {
        std::vector<std::size_t> line;
        for (std::size_t i = 0; i < nx; ++i) line.push_back(junction(i, j));
        city.streets.push_back(line);
        city.street_tags.push_back({{"highway", j % 3 == 0 ? "secondary" : "residential"},
                                    {"name", std::to_string(j + 1) + " Street"}});
    }
    for (std::size_t i = 0; i < nx; ++i) {
        std::vector<std::size_t> line;
        for (std::size_t j = 0; j < ny; ++j) line.push_back(junction(i, j));
        city.streets.push_back(line);
        city.street_tags.push_back({{"highway", i % 2 == 0 ? "primary" : "residential"},
                                    {"name", std::to_string(i + 1) + " Avenue"}});
    }
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            if (rng.uniform() < o.signal_probability) city.signal_points.push_back(junction(i, j));

    osm::OsmId next_poi = 5000000;
    for (std::size_t bj = 0; bj < o.blocks_y; ++bj) {
        for (std::size_t bi = 0; bi < o.blocks_x; ++bi) {
            const PlanePoint c0{static_cast<double>(bi) * b, static_cast<double>(bj) * b};
            if (rng.uniform() < o.park_probability) {
                const double m = 0.125 * b;
                PlanarPoi park;
                park.id = next_poi++;
                park.area = {c0 + PlanePoint{m, m}, c0 + PlanePoint{b - m, m}, c0 + PlanePoint{b - m, b - m},
                             c0 + PlanePoint{m, b - m}};
                park.location = c0 + PlanePoint{b / 2, b / 2};
                park.tags = {{"leisure", "park"}, {"name", kParkNames[rng.below(std::size(kParkNames))]}};
                city.pois.push_back(std::move(park));
                continue;
            }
            const Side sides[4] = {
                {c0, {1, 0}, {0, 1}},
                {c0 + PlanePoint{b, 0}, {0, 1}, {-1, 0}},
                {c0 + PlanePoint{b, b}, {-1, 0}, {0, -1}},
                {c0 + PlanePoint{0, b}, {0, -1}, {1, 0}},
            };
            for (const Side& s : sides) {
                // Storefront POIs sit 8 m off the street, midway between
                // street samples, so sight angles keep clear of bin edges.
                for (double a = 15.0; a < b - 10.0; a += 20.0) {
                    if (rng.uniform() >= o.poi_probability) continue;
                    const bool named = rng.uniform() < 0.8;
                    const Kind& k = named ? kNamed[rng.below(std::size(kNamed))] : kUnnamed[rng.below(std::size(kUnnamed))];
                    city.pois.push_back({next_poi++, s.at(a, 8.0), {}, tags_of(k)});
                }
                if (rng.uniform() < o.building_probability) {
                    // Mid-block facade 12-22 m back; it hides a POI 25 m back but
                    // leaves the storefronts and the corners clear.
                    const double a0 = 0.275 * b, a1 = 0.725 * b;
                    city.buildings.push_back({s.at(a0, 12.0), s.at(a1, 12.0), s.at(a1, 22.0), s.at(a0, 22.0)});
                    if (rng.uniform() < o.hidden_poi_probability) {
                        const Kind& k = kNamed[rng.below(std::size(kNamed))];
                        city.pois.push_back({next_poi++, s.at(b / 2 - 5.0, 25.0), {}, tags_of(k)});
                    }
                }
            }
        }
    }
    return city;
}

PlanarCity transformed(const PlanarCity& city, double rotation_deg, PlanePoint offset) {
    const double r = rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    auto f = [&](const PlanePoint& p) { return PlanePoint{c * p.x - s * p.y + offset.x, s * p.x + c * p.y + offset.y}; };
    PlanarCity out = city;
    for (auto& p : out.street_points) p = f(p);
    for (auto& bld : out.buildings)
        for (auto& p : bld) p = f(p);
    for (auto& poi : out.pois) {
        poi.location = f(poi.location);
        for (auto& p : poi.area) p = f(p);
    }
    return out;
}

std::string to_osm_xml(const PlanarCity& city, const geo::GeoPoint& origin) {
    std::ostringstream xml;
    xml << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"map2seq synth-city\">\n";
    auto escape = [](const std::string& s) {
        std::string out;
        for (char ch : s) {
            switch (ch) {
                case '&': out += "&amp;"; break;
                case '<': out += "&lt;"; break;
                case '>': out += "&gt;"; break;
                case '"': out += "&quot;"; break;
                case '\'': out += "&apos;"; break;
                default: out += ch;
            }
        }
        return out;
    };
    // Unproject around the city's own bounding-box centre so that a planar
    // offset moves the city without skewing its local geometry.
    double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
    bool first = true;
    auto extend = [&](const PlanePoint& p) {
        if (first) lo_x = hi_x = p.x, lo_y = hi_y = p.y, first = false;
        lo_x = std::min(lo_x, p.x), hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y), hi_y = std::max(hi_y, p.y);
    };
    for (const auto& p : city.street_points) extend(p);
    for (const auto& bld : city.buildings)
        for (const auto& p : bld) extend(p);
    for (const auto& poi : city.pois) {
        extend(poi.location);
        for (const auto& p : poi.area) extend(p);
    }
    const PlanePoint centre{(lo_x + hi_x) / 2, (lo_y + hi_y) / 2};
    const geo::GeoPoint local_origin = geo::unproject(centre, origin);
    auto node = [&](osm::OsmId id, const PlanePoint& p, const std::vector<OsmTag>& tags) {
        const geo::GeoPoint g = geo::unproject({p.x - centre.x, p.y - centre.y}, local_origin);
        char buf[128];
        std::snprintf(buf, sizeof buf, "  <node id=\"%lld\" lat=\"%.9f\" lon=\"%.9f\"", static_cast<long long>(id),
                      g.lat, g.lon);
        xml << buf;
        if (tags.empty()) {
            xml << "/>\n";
            return;
        }
        xml << ">\n";
        for (const auto& t : tags) xml << "    <tag k=\"" << escape(t.key) << "\" v=\"" << escape(t.value) << "\"/>\n";
        xml << "  </node>\n";
    };
    auto way = [&](osm::OsmId id, const std::vector<osm::OsmId>& refs, const std::vector<OsmTag>& tags) {
        xml << "  <way id=\"" << id << "\">\n";
        for (auto r : refs) xml << "    <nd ref=\"" << r << "\"/>\n";
        for (const auto& t : tags) xml << "    <tag k=\"" << escape(t.key) << "\" v=\"" << escape(t.value) << "\"/>\n";
        xml << "  </way>\n";
    };

    std::vector<bool> signal(city.street_points.size(), false);
    for (auto i : city.signal_points) signal.at(i) = true;
    for (std::size_t i = 0; i < city.street_points.size(); ++i) {
        std::vector<OsmTag> tags;
        if (signal[i]) tags.push_back({"highway", "traffic_signals"});
        node(static_cast<osm::OsmId>(1 + i), city.street_points[i], tags);
    }
    osm::OsmId next_node = 1000000;
    std::vector<std::vector<osm::OsmId>> building_refs;
    for (const auto& bld : city.buildings) {
        std::vector<osm::OsmId> refs;
        for (const auto& p : bld) {
            node(next_node, p, {});
            refs.push_back(next_node++);
        }
        refs.push_back(refs.front());
        building_refs.push_back(refs);
    }
    std::vector<std::vector<osm::OsmId>> area_refs;
    for (const auto& poi : city.pois) {
        if (poi.area.empty()) {
            node(poi.id, poi.location, poi.tags);
            continue;
        }
        std::vector<osm::OsmId> refs;
        for (const auto& p : poi.area) {
            node(next_node, p, {});
            refs.push_back(next_node++);
        }
        refs.push_back(refs.front());
        area_refs.push_back(refs);
    }

    osm::OsmId next_way = 1;
    for (std::size_t s = 0; s < city.streets.size(); ++s) {
        std::vector<osm::OsmId> refs;
        for (auto i : city.streets[s]) refs.push_back(static_cast<osm::OsmId>(1 + i));
        way(next_way++, refs, city.street_tags[s]);
    }
    for (const auto& refs : building_refs) way(next_way++, refs, {{"building", "yes"}});
    // Area POIs keep their generated id as the way id.
    std::size_t area = 0;
    for (const auto& poi : city.pois)
        if (!poi.area.empty()) way(poi.id, area_refs[area++], poi.tags);
    xml << "</osm>\n";
    return xml.str();
}

}  // namespace map2seq::synth
