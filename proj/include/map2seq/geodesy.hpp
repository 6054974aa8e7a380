#pragma once

#include <span>
#include <vector>

namespace map2seq::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;

struct GeoPoint {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180)

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Meters east (x) and north (y) of a projection origin.
struct PlanePoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
    PlanePoint operator+(const PlanePoint& o) const { return {x + o.x, y + o.y}; }
    PlanePoint operator-(const PlanePoint& o) const { return {x - o.x, y - o.y}; }
    PlanePoint operator*(double s) const { return {x * s, y * s}; }
};

// Implicitly closed ring. Construct through make_polygon to get validation.
struct Polygon {
    std::vector<PlanePoint> vertices;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

// One of the twelve 30-degree direction sectors; bin 0 is centered on 0 deg.
struct AngleBin {
    int index = 0;

    friend bool operator==(const AngleBin&, const AngleBin&) = default;
};

inline constexpr int kAngleBins = 12;

bool is_valid(const GeoPoint& p);

// Equirectangular projection about `origin`. Throws OutOfRangeError when the
// points are more than one degree apart on either axis.
PlanePoint project(const GeoPoint& p, const GeoPoint& origin);
GeoPoint unproject(const PlanePoint& p, const GeoPoint& origin);

double distance(const PlanePoint& a, const PlanePoint& b);

// Clockwise from north, in [0, 360). Throws DegenerateInputError for a == b.
double bearing(const PlanePoint& a, const PlanePoint& b);

// Throws OutOfRangeError outside [0, 360).
AngleBin angle_bin(double angle_deg);

// Angles this close to a bin boundary are put on the boundary, so geometry
// that sits exactly on one (45 degree diagonals in grid cities) keeps its bin
// through coordinate rounding and re-projection.
inline constexpr double kAngleTieDeg = 0.005;

// angle_bin after snapping to a boundary within kAngleTieDeg.
AngleBin stable_angle_bin(double angle_deg);

// Wraps any finite angle into [0, 360).
double wrap_degrees(double angle_deg);

// Signed twice-area; positive for counter-clockwise rings.
double signed_area2(std::span<const PlanePoint> ring);

// True when the ring has >= 3 distinct vertices, non-zero area and no two
// non-adjacent edges touch.
bool is_simple_polygon(std::span<const PlanePoint> ring);

// Throws DegenerateInputError when the ring is not a simple polygon.
Polygon make_polygon(std::vector<PlanePoint> ring);

// Strict interior test; points on the boundary (within `eps`) are outside.
bool point_strictly_inside(const PlanePoint& p, const Polygon& poly, double eps = 1e-9);

bool point_on_boundary(const PlanePoint& p, const Polygon& poly, double eps = 1e-9);

// True iff some part of the open segment (a, b) lies strictly inside a
// building. Grazing a vertex or running along an edge does not block, and an
// endpoint on the boundary (a POI lying on its own polygon) does not block.
bool segment_blocked(const PlanePoint& a, const PlanePoint& b, std::span<const Polygon> buildings);

// Nearest boundary point; ties go to the earliest edge in vertex order.
PlanePoint closest_point_on_polygon(const PlanePoint& p, const Polygon& poly);

PlanePoint centroid(std::span<const PlanePoint> pts);

}  // namespace map2seq::geo
