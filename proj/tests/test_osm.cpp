#include <sstream>
#include <string>

#include "doctest.h"
#include "map2seq/errors.hpp"
#include "map2seq/osm_ingest.hpp"

using namespace map2seq;
using namespace map2seq::osm;

namespace {

MapData parse(const std::string& body) {
    std::istringstream in("<?xml version=\"1.0\"?>\n<osm version=\"0.6\">\n" + body + "</osm>\n");
    return parse_osm(in);
}

const char* kStreet = R"(<node id="1" lat="40.7500" lon="-73.9900"/>
<node id="2" lat="40.7509" lon="-73.9900"/>
<way id="10"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/><tag k="name" v="1 Street"/></way>
)";

}  // namespace

TEST_CASE("one residential way gives one polyline and no POIs") {
    auto m = parse(kStreet);
    REQUIRE(m.street_polylines.size() == 1);
    CHECK(m.street_polylines[0].size() == 2);
    CHECK(m.pois.empty());
    CHECK(m.buildings.empty());
    CHECK(m.projection_origin.lat == doctest::Approx(40.75045));
    CHECK(m.projection_origin.lon == doctest::Approx(-73.99));
}

TEST_CASE("a node tagged amenity=bank is a POI with its tags") {
    auto m = parse(std::string(kStreet) + R"(<node id="3" lat="40.7504" lon="-73.9899">
  <tag k="amenity" v="bank"/><tag k="name" v="Chase Bank"/><tag k="atm" v="yes"/>
</node>
)");
    REQUIRE(m.pois.size() == 1);
    const Poi& p = m.pois[0];
    CHECK(p.id == 3);
    REQUIRE(p.tag("amenity") != nullptr);
    CHECK(*p.tag("amenity") == "bank");
    CHECK(p.tags.size() == 3);  // every tag is retained
    CHECK(p.name_words == std::vector<std::string>{"Chase", "Bank"});
    CHECK_FALSE(p.area.has_value());
}

TEST_CASE("closed building way becomes a polygon, not a street") {
    auto m = parse(R"(<node id="1" lat="40.7500" lon="-73.9900"/>
<node id="2" lat="40.7500" lon="-73.9898"/>
<node id="3" lat="40.7502" lon="-73.9898"/>
<node id="4" lat="40.7502" lon="-73.9900"/>
<way id="20"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="building" v="yes"/></way>
)");
    CHECK(m.street_polylines.empty());
    REQUIRE(m.buildings.size() == 1);
    CHECK(m.buildings[0].vertices.size() == 4);
}

TEST_CASE("closed way with a POI key is an area POI") {
    auto m = parse(R"(<node id="1" lat="40.7500" lon="-73.9900"/>
<node id="2" lat="40.7500" lon="-73.9898"/>
<node id="3" lat="40.7502" lon="-73.9898"/>
<node id="4" lat="40.7502" lon="-73.9900"/>
<way id="30"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="leisure" v="park"/></way>
)");
    REQUIRE(m.pois.size() == 1);
    CHECK(m.pois[0].area.has_value());
    CHECK(m.pois[0].location.lat == doctest::Approx(40.7501));
}

TEST_CASE("non-allow-listed highway values are ignored") {
    auto m = parse(R"(<node id="1" lat="40.7500" lon="-73.9900"/>
<node id="2" lat="40.7509" lon="-73.9900"/>
<way id="10"><nd ref="1"/><nd ref="2"/><tag k="highway" v="footway"/></way>
)");
    CHECK(m.street_polylines.empty());
}

TEST_CASE("malformed XML reports a line number") {
    std::istringstream in("<osm>\n<node id=\"1\" lat=\"1\" lon=\"2\">\n</osm>\n");
    try {
        parse_osm(in);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
}

TEST_CASE("unresolved node reference names the missing id") {
    try {
        parse(R"(<node id="1" lat="40.75" lon="-73.99"/>
<way id="10"><nd ref="1"/><nd ref="99"/><tag k="highway" v="primary"/></way>
)");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("validate: clean map gives an empty report") {
    auto m = parse(kStreet);
    CHECK(validate(m).empty());
}

TEST_CASE("validate: bow-tie building is dropped") {
    auto m = parse(std::string(kStreet) + R"(<node id="11" lat="40.7500" lon="-73.9895"/>
<node id="12" lat="40.7502" lon="-73.9893"/>
<node id="13" lat="40.7500" lon="-73.9893"/>
<node id="14" lat="40.7502" lon="-73.9895"/>
<way id="21"><nd ref="11"/><nd ref="12"/><nd ref="13"/><nd ref="14"/><nd ref="11"/><tag k="building" v="yes"/></way>
)");
    auto report = validate(m);
    CHECK(report.dropped_buildings.size() == 1);
    CHECK(m.buildings.empty());
}

TEST_CASE("validate: duplicate consecutive points are collapsed") {
    auto m = parse(R"(<node id="1" lat="40.7500" lon="-73.9900"/>
<node id="2" lat="40.7500" lon="-73.9900"/>
<node id="3" lat="40.7509" lon="-73.9900"/>
<way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/></way>
)");
    auto report = validate(m);
    CHECK(report.collapsed_segments.size() == 1);
    CHECK(m.street_polylines[0].size() == 2);
}

TEST_CASE("split_name keeps punctuation inside words") {
    CHECK(split_name("Bubble Tea & Crepes") == std::vector<std::string>{"Bubble", "Tea", "&", "Crepes"});
    CHECK(split_name("  Joe's   Pizza ") == std::vector<std::string>{"Joe's", "Pizza"});
    CHECK(split_name("").empty());
}

TEST_CASE("MapData JSON round trip is the identity") {
    auto m = parse(std::string(kStreet) + R"(<node id="3" lat="40.7504" lon="-73.9899">
  <tag k="amenity" v="cafe"/><tag k="name" v="Blue Bottle"/>
</node>
<node id="4" lat="40.7500" lon="-73.9897"/>
<node id="5" lat="40.7500" lon="-73.9895"/>
<node id="6" lat="40.7502" lon="-73.9895"/>
<node id="7" lat="40.7502" lon="-73.9897"/>
<way id="20"><nd ref="4"/><nd ref="5"/><nd ref="6"/><nd ref="7"/><nd ref="4"/><tag k="building" v="yes"/></way>
)");
    auto back = map_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(back == m);
}
