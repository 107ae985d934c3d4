#pragma once

#include <cmath>
#include <vector>

#include "evtc/errors.hpp"

// Planar geometry over projected coordinates (meters). No geodesy here: the
// synthetic generator emits planar coordinates directly.

namespace evtc::geometry {

struct Point {
    double x = 0;
    double y = 0;
};

inline double dist2(const Point& a, const Point& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double dist(const Point& a, const Point& b) { return std::sqrt(dist2(a, b)); }

// Squared distance from p to segment [a, b]; degenerate segments collapse to
// the point distance.
inline double point_segment_dist2(const Point& p, const Point& a, const Point& b) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double len2 = vx * vx + vy * vy;
    if (len2 <= 0) return dist2(p, a);
    double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
    if (t < 0) t = 0;
    if (t > 1) t = 1;
    Point proj{a.x + t * vx, a.y + t * vy};
    return dist2(p, proj);
}

using Ring = std::vector<Point>;

enum class Containment { Outside, Boundary, Inside };

inline bool on_segment(const Point& p, const Point& a, const Point& b) {
    double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross != 0.0) return false;
    double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
    return dot >= 0.0 && dot <= len2;
}

// Even-odd ray cast; boundary reported separately so callers can apply the
// smallest-id tie-break for shared borders.
inline Containment ring_contains(const Ring& ring, const Point& p) {
    if (ring.size() < 3) throw DataError("degenerate polygon ring");
    bool inside = false;
    std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[j];
        const Point& b = ring[i];
        if (on_segment(p, a, b)) return Containment::Boundary;
        if ((b.y > p.y) != (a.y > p.y)) {
            double x_cross = (a.x - b.x) * (p.y - b.y) / (a.y - b.y) + b.x;
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside ? Containment::Inside : Containment::Outside;
}

inline Containment polygon_contains(const std::vector<Ring>& rings, const Point& p) {
    int inside_count = 0;
    for (const Ring& r : rings) {
        Containment c = ring_contains(r, p);
        if (c == Containment::Boundary) return Containment::Boundary;
        if (c == Containment::Inside) ++inside_count;
    }
    return (inside_count % 2 == 1) ? Containment::Inside : Containment::Outside;
}

inline double ring_area(const Ring& ring) {
    double s = 0;
    std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        s += ring[j].x * ring[i].y - ring[i].x * ring[j].y;
    return std::abs(s) / 2.0;
}

} // namespace evtc::geometry
