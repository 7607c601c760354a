#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace cloop {

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr bool operator==(const Vec2&) const = default;

    double norm() const { return std::hypot(x, y); }
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Planar pose. The heading is kept in (-pi, pi] by every constructor path.
class Pose2D
{
public:
    Pose2D() = default;
    Pose2D(double x, double y, double heading) : x(x), y(y), heading_(normalize_angle(heading)) {}
    Pose2D(Vec2 p, double heading) : Pose2D(p.x, p.y, heading) {}

    double x = 0.0;
    double y = 0.0;

    double heading() const { return heading_; }
    void set_heading(double h) { heading_ = normalize_angle(h); }
    Vec2 position() const { return {x, y}; }

    bool operator==(const Pose2D&) const = default;

private:
    double heading_ = 0.0;
};

/// Relative motion expressed in a body frame.
struct Delta2D
{
    double dx = 0.0;
    double dy = 0.0;
    double dheading = 0.0;
};

Vec2 rotate(Vec2 v, double angle);
/// Applies a body-frame motion to a pose.
Pose2D compose(const Pose2D& base, const Delta2D& d);
/// Motion that takes `from` to `to`, expressed in the frame of `from`.
Delta2D relative(const Pose2D& from, const Pose2D& to);
/// World point expressed in the body frame of `frame`.
Vec2 to_local(const Pose2D& frame, Vec2 p);

/// Rectangle given by its four corners in counter-clockwise order.
using OrientedBox = std::array<Vec2, 4>;

OrientedBox make_box(const Pose2D& center, double length, double width);

/// Separating-axis test over the four edge normals. Touching counts as overlap.
bool obb_overlap(const OrientedBox& a, const OrientedBox& b);

/// Minimum distance between the boundaries of two disjoint boxes, or the
/// negated penetration depth when they overlap.
double box_signed_distance(const OrientedBox& a, const OrientedBox& b);

using Polygon = std::vector<Vec2>;

/// Even-odd ray crossing test; points on the boundary count as inside.
bool point_in_polygon(Vec2 p, std::span<const Vec2> poly);
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
double point_polygon_boundary_distance(Vec2 p, std::span<const Vec2> poly);
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);
/// True when no two non-adjacent edges intersect.
bool polygon_is_simple(std::span<const Vec2> poly);

} // namespace cloop
