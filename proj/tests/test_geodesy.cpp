#include <cmath>

#include "doctest.h"
#include "map2seq/errors.hpp"
#include "map2seq/geodesy.hpp"
#include "oracles.hpp"

using namespace map2seq;
using namespace map2seq::geo;

namespace {

Polygon square(double cx, double cy, double half) {
    return Polygon{{{cx - half, cy - half}, {cx + half, cy - half}, {cx + half, cy + half}, {cx - half, cy + half}}};
}

}  // namespace

TEST_CASE("project: origin maps to zero and one degree is about 111195 m") {
    GeoPoint o{40.75, -73.99};
    auto z = project(o, o);
    CHECK(z.x == 0.0);
    CHECK(z.y == 0.0);
    auto north = project({o.lat + 1.0, o.lon}, o);
    CHECK(north.y == doctest::Approx(111195.0).epsilon(1.0 / 111195.0));
    auto east = project({0.0, 1.0}, {0.0, 0.0});
    CHECK(east.x == doctest::Approx(kPi / 180 * kEarthRadiusM));
    CHECK(std::abs(east.x - 111195.0) <= 1.0);
}

TEST_CASE("project: far points are rejected and unproject inverts") {
    GeoPoint o{40.75, -73.99};
    CHECK_THROWS_AS(project({o.lat + 1.5, o.lon}, o), OutOfRangeError);
    CHECK_THROWS_AS(project({o.lat, o.lon - 1.2}, o), OutOfRangeError);
    GeoPoint p{40.7512, -73.9871};
    auto back = unproject(project(p, o), o);
    CHECK(back.lat == doctest::Approx(p.lat).epsilon(1e-12));
    CHECK(back.lon == doctest::Approx(p.lon).epsilon(1e-12));
}

TEST_CASE("distance and bearing") {
    CHECK(distance({1, 2}, {1, 2}) == 0.0);
    CHECK(distance({0, 0}, {3, 4}) == 5.0);
    CHECK(distance({0, 0}, {30, 0}) == 30.0);
    CHECK(bearing({0, 0}, {0, 5}) == doctest::Approx(0.0));
    CHECK(bearing({0, 0}, {5, 0}) == doctest::Approx(90.0));
    CHECK(bearing({0, 0}, {-5, -5}) == doctest::Approx(225.0));
    CHECK(bearing({0, 0}, {0, -1}) == doctest::Approx(180.0));
    CHECK_THROWS_AS(bearing({1, 1}, {1, 1}), DegenerateInputError);
}

TEST_CASE("angle_bin boundaries") {
    CHECK(angle_bin(0.0).index == 0);
    CHECK(angle_bin(344.9).index == 11);
    CHECK(angle_bin(345.0).index == 0);
    CHECK(angle_bin(14.999).index == 0);
    CHECK(angle_bin(15.0).index == 1);
    CHECK(angle_bin(90.0).index == 3);
    CHECK(angle_bin(180.0).index == 6);
    CHECK_THROWS_AS(angle_bin(360.0), OutOfRangeError);
    CHECK_THROWS_AS(angle_bin(-0.1), OutOfRangeError);
    for (int k = 0; k < 3600; ++k) {
        double a = k * 0.1;
        int expected = static_cast<int>(std::floor(std::fmod(a + 15.0, 360.0) / 30.0));
        REQUIRE(angle_bin(a).index == expected);
    }
}

TEST_CASE("stable_angle_bin snaps near-boundary angles") {
    CHECK(stable_angle_bin(315.0).index == 11);
    CHECK(stable_angle_bin(314.997).index == 11);
    CHECK(stable_angle_bin(315.003).index == 11);
    CHECK(stable_angle_bin(314.9).index == 10);
    CHECK(stable_angle_bin(344.999).index == 0);
    CHECK(stable_angle_bin(359.99).index == 0);
    CHECK(stable_angle_bin(90.0).index == 3);
    for (int k = 0; k < 3600; ++k) {
        double a = k * 0.1 + 0.05;
        REQUIRE(stable_angle_bin(a).index == angle_bin(a).index);
    }
}

TEST_CASE("wrap_degrees") {
    CHECK(wrap_degrees(-90) == doctest::Approx(270));
    CHECK(wrap_degrees(720 + 10) == doctest::Approx(10));
    CHECK(wrap_degrees(0) == 0);
    double w = wrap_degrees(-1e-18);
    CHECK(w >= 0.0);
    CHECK(w < 360.0);
}

TEST_CASE("polygon validation") {
    CHECK(is_simple_polygon(square(0, 0, 1).vertices));
    std::vector<PlanePoint> bow{{0, 0}, {2, 2}, {2, 0}, {0, 2}};
    CHECK_FALSE(is_simple_polygon(bow));
    CHECK_THROWS_AS(make_polygon(bow), DegenerateInputError);
    CHECK_THROWS_AS(make_polygon({{0, 0}, {1, 1}}), DegenerateInputError);
    CHECK_THROWS_AS(make_polygon({{0, 0}, {1, 1}, {2, 2}}), DegenerateInputError);
    CHECK(signed_area2(square(0, 0, 1).vertices) == doctest::Approx(8.0));
}

TEST_CASE("point in polygon excludes the boundary") {
    auto sq = square(0, 0, 1);
    CHECK(point_strictly_inside({0, 0}, sq));
    CHECK_FALSE(point_strictly_inside({1, 0}, sq));
    CHECK(point_on_boundary({1, 0}, sq));
    CHECK_FALSE(point_strictly_inside({2, 0}, sq));
}

TEST_CASE("segment_blocked fixtures") {
    std::vector<Polygon> none;
    CHECK_FALSE(segment_blocked({0, 0}, {10, 0}, none));
    std::vector<Polygon> unit{square(5, 0, 0.5)};
    CHECK(segment_blocked({0, 0}, {10, 0}, unit));
    std::vector<Polygon> aside{square(5, 3, 1)};
    CHECK_FALSE(segment_blocked({0, 0}, {10, 0}, aside));
    // Running along an edge or touching a vertex does not block.
    std::vector<Polygon> edge{square(5, 1, 1)};
    CHECK_FALSE(segment_blocked({0, 0}, {10, 0}, edge));
    std::vector<Polygon> diamond{Polygon{{{5, 0}, {6, 1}, {5, 2}, {4, 1}}}};
    CHECK_FALSE(segment_blocked({0, 0}, {10, 0}, diamond));
    // The target lying on the polygon it belongs to.
    std::vector<Polygon> target{square(12, 0, 2)};
    CHECK_FALSE(segment_blocked({0, 0}, {10, 0}, target));
    CHECK(segment_blocked({0, 0}, {14, 0}, target));
}

TEST_CASE("segment_blocked agrees with dense sampling") {
    CounterRng rng(2024);
    int blocked = 0;
    for (int i = 0; i < 300; ++i) {
        auto c = oracle::random_occlusion_case(rng);
        bool expected = oracle::dense_segment_blocked(c.a, c.b, c.buildings);
        bool got = segment_blocked(c.a, c.b, c.buildings);
        CAPTURE(i);
        REQUIRE(got == expected);
        blocked += got;
    }
    // Both outcomes are exercised.
    CHECK(blocked > 30);
    CHECK(blocked < 270);
}

TEST_CASE("closest_point_on_polygon agrees with dense sampling") {
    CounterRng rng(77);
    for (int i = 0; i < 300; ++i) {
        auto poly = oracle::random_star(rng, {0, 0}, rng.uniform(2, 15));
        PlanePoint p{rng.uniform(-30, 30), rng.uniform(-30, 30)};
        auto c = closest_point_on_polygon(p, poly);
        double spacing = 0;
        double sampled = oracle::dense_closest_distance(p, poly, 2000, &spacing);
        double got = distance(p, c);
        CAPTURE(i);
        REQUIRE(oracle::boundary_distance(c, poly) < 1e-9);
        REQUIRE(got <= sampled + 1e-9);
        REQUIRE(got >= sampled - spacing);
    }
}

TEST_CASE("closest_point_on_polygon simple cases") {
    auto sq = square(0, 0, 1);
    auto c = closest_point_on_polygon({3, 0}, sq);
    CHECK(c.x == doctest::Approx(1));
    CHECK(c.y == doctest::Approx(0));
    auto corner = closest_point_on_polygon({3, 3}, sq);
    CHECK(corner.x == doctest::Approx(1));
    CHECK(corner.y == doctest::Approx(1));
    auto inner = closest_point_on_polygon({0.5, 0.1}, sq);
    CHECK(inner.x == doctest::Approx(1));
    CHECK(inner.y == doctest::Approx(0.1));
}
