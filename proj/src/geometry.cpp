#include "cloop/geometry.hpp"

#include <algorithm>
#include <limits>

namespace cloop {

double normalize_angle(double a)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::remainder(a, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    return r;
}

Vec2 rotate(Vec2 v, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Pose2D compose(const Pose2D& base, const Delta2D& d)
{
    const Vec2 offset = rotate({d.dx, d.dy}, base.heading());
    return Pose2D(base.x + offset.x, base.y + offset.y, base.heading() + d.dheading);
}

Delta2D relative(const Pose2D& from, const Pose2D& to)
{
    const Vec2 local = to_local(from, to.position());
    return {local.x, local.y, normalize_angle(to.heading() - from.heading())};
}

Vec2 to_local(const Pose2D& frame, Vec2 p)
{
    return rotate(p - frame.position(), -frame.heading());
}

OrientedBox make_box(const Pose2D& center, double length, double width)
{
    const double hl = 0.5 * length;
    const double hw = 0.5 * width;
    const Vec2 c = center.position();
    const Vec2 f = rotate({hl, 0.0}, center.heading());
    const Vec2 l = rotate({0.0, hw}, center.heading());
    return {c + f - l, c + f + l, c - f + l, c - f - l};
}

namespace {

struct Interval
{
    double lo;
    double hi;
};

Interval project(const OrientedBox& box, Vec2 axis)
{
    Interval r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Vec2& v : box) {
        const double p = dot(v, axis);
        r.lo = std::min(r.lo, p);
        r.hi = std::max(r.hi, p);
    }
    return r;
}

// Smallest overlap of the two projections over all candidate axes; negative
// when some axis separates the boxes.
double min_axis_overlap(const OrientedBox& a, const OrientedBox& b)
{
    double best = std::numeric_limits<double>::infinity();
    for (const OrientedBox* box : {&a, &b}) {
        for (int i = 0; i < 2; ++i) {
            const Vec2 edge = (*box)[i + 1] - (*box)[i];
            const double n = edge.norm();
            if (n == 0.0) continue;
            const Vec2 axis{-edge.y / n, edge.x / n};
            const Interval pa = project(a, axis);
            const Interval pb = project(b, axis);
            best = std::min(best, std::min(pa.hi, pb.hi) - std::max(pa.lo, pb.lo));
        }
    }
    return best;
}

} // namespace

bool obb_overlap(const OrientedBox& a, const OrientedBox& b)
{
    return min_axis_overlap(a, b) >= 0.0;
}

double box_signed_distance(const OrientedBox& a, const OrientedBox& b)
{
    const double overlap = min_axis_overlap(a, b);
    if (overlap >= 0.0) return -overlap;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            best = std::min(best, point_segment_distance(a[i], b[j], b[(j + 1) % 4]));
            best = std::min(best, point_segment_distance(b[i], a[j], a[(j + 1) % 4]));
        }
    }
    return best;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b)
{
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + ab * t);
}

double point_polygon_boundary_distance(Vec2 p, std::span<const Vec2> poly)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i)
        best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
    return best;
}

bool point_in_polygon(Vec2 p, std::span<const Vec2> poly)
{
    if (poly.size() < 3) return false;
    if (point_polygon_boundary_distance(p, poly) <= 1e-12) return true;
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d)
{
    auto orient = [](Vec2 p, Vec2 q, Vec2 r) { return cross(q - p, r - p); };
    auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
               r.y <= std::max(p.y, q.y);
    };
    const double d1 = orient(c, d, a);
    const double d2 = orient(c, d, b);
    const double d3 = orient(a, b, c);
    const double d4 = orient(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

bool polygon_is_simple(std::span<const Vec2> poly)
{
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
        }
    }
    return true;
}

} // namespace cloop
