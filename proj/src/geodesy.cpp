#include "map2seq/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "map2seq/errors.hpp"

namespace map2seq::geo {
namespace {

constexpr double kDegToRad = kPi / 180.0;

double cross(const PlanePoint& a, const PlanePoint& b) { return a.x * b.y - a.y * b.x; }
double dot(const PlanePoint& a, const PlanePoint& b) { return a.x * b.x + a.y * b.y; }

// Orientation sign of (a, b, c) with a relative tolerance.
int orient(const PlanePoint& a, const PlanePoint& b, const PlanePoint& c) {
    double v = cross(b - a, c - a);
    double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), std::abs(c.x - a.x),
                             std::abs(c.y - a.y), 1.0});
    if (std::abs(v) <= 1e-12 * scale * scale) return 0;
    return v > 0 ? 1 : -1;
}

bool on_segment(const PlanePoint& p, const PlanePoint& q, const PlanePoint& r) {
    return std::min(p.x, q.x) - 1e-12 <= r.x && r.x <= std::max(p.x, q.x) + 1e-12 &&
           std::min(p.y, q.y) - 1e-12 <= r.y && r.y <= std::max(p.y, q.y) + 1e-12;
}

bool segments_touch(const PlanePoint& p1, const PlanePoint& p2, const PlanePoint& q1,
                    const PlanePoint& q2) {
    int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
    int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

double point_segment_distance(const PlanePoint& p, const PlanePoint& a, const PlanePoint& b) {
    PlanePoint d = b - a;
    double len2 = dot(d, d);
    double t = len2 > 0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
    return distance(p, a + d * t);
}

struct Box {
    double min_x, min_y, max_x, max_y;
};

Box bounds(const Polygon& poly) {
    Box b{poly.vertices[0].x, poly.vertices[0].y, poly.vertices[0].x, poly.vertices[0].y};
    for (const auto& v : poly.vertices) {
        b.min_x = std::min(b.min_x, v.x);
        b.min_y = std::min(b.min_y, v.y);
        b.max_x = std::max(b.max_x, v.x);
        b.max_y = std::max(b.max_y, v.y);
    }
    return b;
}

bool segment_enters(const PlanePoint& a, const PlanePoint& b, const Polygon& poly) {
    const PlanePoint d = b - a;
    const double len2 = dot(d, d);
    const std::size_t n = poly.vertices.size();

    // Parameters along (a, b) where the boundary is met. Between two
    // consecutive parameters the segment is either wholly inside or wholly
    // outside, so one midpoint test per piece decides.
    std::vector<double> ts{0.0, 1.0};
    for (std::size_t k = 0; k < n; ++k) {
        const PlanePoint& p = poly.vertices[k];
        const PlanePoint& q = poly.vertices[(k + 1) % n];
        const PlanePoint e = q - p;
        const double denom = cross(d, e);
        const double scale = std::sqrt(len2 * dot(e, e));
        if (std::abs(denom) > 1e-12 * scale) {
            double t = cross(p - a, e) / denom;
            double u = cross(p - a, d) / denom;
            if (u >= -1e-12 && u <= 1.0 + 1e-12 && t > 0.0 && t < 1.0) ts.push_back(t);
        } else {
            // Parallel: only collinear overlaps contribute breakpoints.
            for (const PlanePoint& v : {p, q}) {
                double t = dot(v - a, d) / len2;
                if (t > 0.0 && t < 1.0) ts.push_back(t);
            }
        }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        if (ts[i + 1] - ts[i] <= 1e-12) continue;
        PlanePoint mid = a + d * (0.5 * (ts[i] + ts[i + 1]));
        if (point_strictly_inside(mid, poly)) return true;
    }
    return false;
}

}  // namespace

bool is_valid(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
           p.lon >= -180.0 && p.lon < 180.0;
}

PlanePoint project(const GeoPoint& p, const GeoPoint& origin) {
    if (!is_valid(p) || !is_valid(origin)) {
        throw OutOfRangeError("project: coordinate outside the valid lat/lon range");
    }
    if (std::abs(p.lat - origin.lat) > 1.0 || std::abs(p.lon - origin.lon) > 1.0) {
        std::ostringstream msg;
        msg << "project: point (" << p.lat << ", " << p.lon << ") is more than 1 degree from origin ("
            << origin.lat << ", " << origin.lon << ")";
        throw OutOfRangeError(msg.str());
    }
    return {kEarthRadiusM * (p.lon - origin.lon) * std::cos(origin.lat * kDegToRad) * kDegToRad,
            kEarthRadiusM * (p.lat - origin.lat) * kDegToRad};
}

GeoPoint unproject(const PlanePoint& p, const GeoPoint& origin) {
    return {origin.lat + p.y / (kEarthRadiusM * kDegToRad),
            origin.lon + p.x / (kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad))};
}

double distance(const PlanePoint& a, const PlanePoint& b) { return std::hypot(b.x - a.x, b.y - a.y); }

double wrap_degrees(double angle_deg) {
    double r = std::fmod(angle_deg, 360.0);
    if (r < 0) r += 360.0;
    if (r >= 360.0) r = 0.0;
    return r;
}

double bearing(const PlanePoint& a, const PlanePoint& b) {
    if (a == b) throw DegenerateInputError("bearing: coincident points");
    // atan2(east, north) measures clockwise from north.
    return wrap_degrees(std::atan2(b.x - a.x, b.y - a.y) / kDegToRad);
}

AngleBin angle_bin(double angle_deg) {
    if (!(angle_deg >= 0.0 && angle_deg < 360.0)) {
        std::ostringstream msg;
        msg << "angle_bin: angle " << angle_deg << " outside [0, 360)";
        throw OutOfRangeError(msg.str());
    }
    double shifted = angle_deg + 15.0;
    if (shifted >= 360.0) shifted -= 360.0;
    int idx = static_cast<int>(std::floor(shifted / 30.0));
    return {std::clamp(idx, 0, kAngleBins - 1)};
}

AngleBin stable_angle_bin(double angle_deg) {
    const double boundary = std::round((angle_deg - 15.0) / 30.0) * 30.0 + 15.0;
    if (std::abs(angle_deg - boundary) < kAngleTieDeg) angle_deg = wrap_degrees(boundary);
    return angle_bin(angle_deg);
}

double signed_area2(std::span<const PlanePoint> ring) {
    double s = 0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        s += cross(ring[i], ring[(i + 1) % ring.size()]);
    }
    return s;
}

bool is_simple_polygon(std::span<const PlanePoint> ring) {
    const std::size_t n = ring.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(ring[i].x) || !std::isfinite(ring[i].y)) return false;
        if (ring[i] == ring[(i + 1) % n]) return false;
    }
    if (std::abs(signed_area2(ring)) <= 1e-12) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const PlanePoint& a1 = ring[i];
        const PlanePoint& a2 = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const PlanePoint& b1 = ring[j];
            const PlanePoint& b2 = ring[(j + 1) % n];
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // Shared vertex is expected; a collinear fold-back is not.
                const PlanePoint& shared = (j == i + 1) ? a2 : a1;
                const PlanePoint& other_a = (j == i + 1) ? a1 : a2;
                const PlanePoint& other_b = (j == i + 1) ? b2 : b1;
                if (orient(other_a, shared, other_b) == 0 &&
                    dot(other_a - shared, other_b - shared) > 0) {
                    return false;
                }
                continue;
            }
            if (segments_touch(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

Polygon make_polygon(std::vector<PlanePoint> ring) {
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
    if (!is_simple_polygon(ring)) {
        throw DegenerateInputError("polygon is degenerate or self-intersecting");
    }
    return Polygon{std::move(ring)};
}

bool point_on_boundary(const PlanePoint& p, const Polygon& poly, double eps) {
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (point_segment_distance(p, poly.vertices[i], poly.vertices[(i + 1) % n]) <= eps) {
            return true;
        }
    }
    return false;
}

bool point_strictly_inside(const PlanePoint& p, const Polygon& poly, double eps) {
    if (point_on_boundary(p, poly, eps)) return false;
    bool inside = false;
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const PlanePoint& vi = poly.vertices[i];
        const PlanePoint& vj = poly.vertices[j];
        if ((vi.y > p.y) != (vj.y > p.y)) {
            double x = vj.x + (p.y - vj.y) * (vi.x - vj.x) / (vi.y - vj.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

bool segment_blocked(const PlanePoint& a, const PlanePoint& b, std::span<const Polygon> buildings) {
    if (a == b) return false;
    const double min_x = std::min(a.x, b.x), max_x = std::max(a.x, b.x);
    const double min_y = std::min(a.y, b.y), max_y = std::max(a.y, b.y);
    for (const Polygon& poly : buildings) {
        Box box = bounds(poly);
        if (box.max_x < min_x || box.min_x > max_x || box.max_y < min_y || box.min_y > max_y) {
            continue;
        }
        // A building containing either endpoint is not an occluder for it.
        if (point_strictly_inside(a, poly) || point_strictly_inside(b, poly)) continue;
        if (segment_enters(a, b, poly)) return true;
    }
    return false;
}

PlanePoint closest_point_on_polygon(const PlanePoint& p, const Polygon& poly) {
    const std::size_t n = poly.vertices.size();
    PlanePoint best = poly.vertices[0];
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const PlanePoint& a = poly.vertices[i];
        const PlanePoint d = poly.vertices[(i + 1) % n] - a;
        double len2 = dot(d, d);
        double t = len2 > 0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
        PlanePoint c = a + d * t;
        PlanePoint diff = p - c;
        double d2 = dot(diff, diff);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
        }
    }
    return best;
}

PlanePoint centroid(std::span<const PlanePoint> pts) {
    PlanePoint c{};
    if (pts.empty()) return c;
    for (const auto& p : pts) c = c + p;
    return c * (1.0 / static_cast<double>(pts.size()));
}

}  // namespace map2seq::geo
