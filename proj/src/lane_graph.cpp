#include "cloop/lane_graph.hpp"

#include "cloop/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace cloop {

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points))
{
    if (points_.size() < 2) throw Error("polyline needs at least 2 points");
    s_.resize(points_.size());
    s_[0] = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double d = distance(points_[i - 1], points_[i]);
        if (!(d > 0.0)) throw Error("polyline has repeated consecutive points at index " + std::to_string(i));
        s_[i] = s_[i - 1] + d;
    }
}

std::size_t Polyline::segment_index(double s) const
{
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const std::ptrdiff_t idx = std::distance(s_.begin(), it) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(s_.size()) - 2));
}

Vec2 Polyline::point_at(double s) const
{
    const std::size_t i = segment_index(s);
    const double seg = s_[i + 1] - s_[i];
    const double t = (s - s_[i]) / seg;
    return points_[i] + (points_[i + 1] - points_[i]) * t;
}

double Polyline::heading_at(double s) const
{
    const std::size_t i = segment_index(s);
    const Vec2 d = points_[i + 1] - points_[i];
    return std::atan2(d.y, d.x);
}

double Polyline::curvature_at(double s) const
{
    constexpr double half_window = 2.0;
    return normalize_angle(heading_at(s + half_window) - heading_at(s - half_window)) / (2.0 * half_window);
}

Vec2 Polyline::normal_at(double s) const
{
    const double h = heading_at(s);
    return {-std::sin(h), std::cos(h)};
}

PolylineProjection Polyline::project(Vec2 p) const
{
    PolylineProjection best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
        const Vec2 a = points_[i];
        const Vec2 ab = points_[i + 1] - a;
        const double len = s_[i + 1] - s_[i];
        const double t = std::clamp(dot(p - a, ab) / (len * len), 0.0, 1.0);
        const Vec2 q = a + ab * t;
        const double d = distance(p, q);
        if (d < best_dist) {
            best_dist = d;
            const double side = cross(ab, p - q);
            best.arc_length = s_[i] + t * len;
            best.lateral_offset = side < 0.0 ? -d : d;
            best.tangent_heading = std::atan2(ab.y, ab.x);
            best.point = q;
        }
    }
    return best;
}

namespace {

Polygon offset_polygon(const Polyline& line, double width)
{
    const auto& pts = line.points();
    const std::size_t n = pts.size();
    std::vector<Vec2> normals(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec2 d = pts[i + 1] - pts[i];
        const double len = d.norm();
        normals[i] = {-d.y / len, d.x / len};
    }
    const double half = 0.5 * width;
    std::vector<Vec2> left(n);
    std::vector<Vec2> right(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 m;
        double scale = 1.0;
        if (i == 0) {
            m = normals.front();
        } else if (i == n - 1) {
            m = normals.back();
        } else {
            const Vec2 sum = normals[i - 1] + normals[i];
            const double len = sum.norm();
            if (len < 1e-9) throw Error("lane centerline reverses direction");
            m = sum * (1.0 / len);
            scale = 1.0 / dot(m, normals[i]);
        }
        left[i] = pts[i] + m * (half * scale);
        right[i] = pts[i] - m * (half * scale);
    }
    Polygon poly = left;
    poly.insert(poly.end(), right.rbegin(), right.rend());
    return poly;
}

} // namespace

Lane::Lane(LaneSpec spec) : spec_(std::move(spec)), centerline_(spec_.centerline)
{
    if (!(spec_.width > 0.0)) throw Error("lane " + std::to_string(spec_.id) + ": width must be positive");
    if (!(spec_.speed_limit > 0.0)) throw Error("lane " + std::to_string(spec_.id) + ": speed_limit must be positive");
    polygon_ = offset_polygon(centerline_, spec_.width);
    if (!polygon_is_simple(polygon_))
        throw Error("lane " + std::to_string(spec_.id) + ": footprint polygon self-intersects");
}

CenterlineProjection project_to_centerline(const Pose2D& p, const Lane& lane)
{
    const PolylineProjection proj = lane.centerline().project(p.position());
    return {proj.arc_length, proj.lateral_offset, normalize_angle(p.heading() - proj.tangent_heading)};
}

LaneGraph::LaneGraph(std::vector<LaneSpec> lanes)
{
    for (auto& spec : lanes) {
        const int id = spec.id;
        if (!lanes_.emplace(id, Lane(std::move(spec))).second)
            throw Error("duplicate lane id " + std::to_string(id));
    }
    for (const auto& [id, lane] : lanes_) {
        for (int succ : lane.successors())
            if (!has_lane(succ))
                throw Error("lane " + std::to_string(id) + ": unknown successor " + std::to_string(succ));
        if (auto l = lane.left_neighbor()) {
            if (!has_lane(*l)) throw Error("lane " + std::to_string(id) + ": unknown left neighbor " + std::to_string(*l));
            if (this->lane(*l).right_neighbor() != id)
                throw Error("lane " + std::to_string(id) + ": left neighbor " + std::to_string(*l) +
                            " does not list it as right neighbor");
        }
        if (auto r = lane.right_neighbor()) {
            if (!has_lane(*r))
                throw Error("lane " + std::to_string(id) + ": unknown right neighbor " + std::to_string(*r));
            if (this->lane(*r).left_neighbor() != id)
                throw Error("lane " + std::to_string(id) + ": right neighbor " + std::to_string(*r) +
                            " does not list it as left neighbor");
        }
    }
}

const Lane& LaneGraph::lane(int id) const
{
    const auto it = lanes_.find(id);
    if (it == lanes_.end()) throw Error("unknown lane id " + std::to_string(id));
    return it->second;
}

bool LaneGraph::in_drivable_area(Vec2 p) const
{
    return std::any_of(lanes_.begin(), lanes_.end(),
                       [&](const auto& kv) { return point_in_polygon(p, kv.second.polygon()); });
}

double LaneGraph::distance_outside(Vec2 p) const
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, lane] : lanes_) {
        if (point_in_polygon(p, lane.polygon())) return 0.0;
        best = std::min(best, point_polygon_boundary_distance(p, lane.polygon()));
    }
    return best;
}

std::optional<LanePosition> LaneGraph::locate(const Pose2D& p, std::optional<int> hint) const
{
    auto candidate = [&](const Lane& lane) -> std::optional<LanePosition> {
        const CenterlineProjection proj = project_to_centerline(p, lane);
        if (std::abs(proj.lateral_offset) > 0.5 * lane.width()) return std::nullopt;
        if (std::abs(proj.heading_error) >= std::numbers::pi / 2) return std::nullopt;
        // Projections clamped to an end are only accepted if the point is
        // not past that end.
        const Vec2 local_start = to_local(Pose2D(lane.centerline().points().front(), lane.centerline().heading_at(0.0)),
                                          p.position());
        const Vec2 local_end =
            to_local(Pose2D(lane.centerline().points().back(), lane.centerline().heading_at(lane.length())),
                     p.position());
        if (local_start.x < 0.0 || local_end.x > 0.0) return std::nullopt;
        return LanePosition{lane.id(), proj.arc_length, proj.lateral_offset, proj.heading_error};
    };
    if (hint && has_lane(*hint)) {
        const Lane& h = lane(*hint);
        if (auto c = candidate(h)) return c;
        for (int succ : h.successors())
            if (auto c = candidate(lane(succ))) return c;
    }
    std::optional<LanePosition> best;
    for (const auto& [id, lane] : lanes_) {
        auto c = candidate(lane);
        if (c && (!best || std::abs(c->lateral_offset) < std::abs(best->lateral_offset))) best = c;
    }
    return best;
}

std::vector<LaneSpec> LaneGraph::specs() const
{
    std::vector<LaneSpec> out;
    out.reserve(lanes_.size());
    for (const auto& [id, lane] : lanes_) out.push_back(lane.spec());
    return out;
}

Route::Route(std::vector<int> lane_ids, const LaneGraph& graph) : lane_ids_(std::move(lane_ids))
{
    if (lane_ids_.empty()) throw Error("route is empty");
    std::vector<int> chain{lane_ids_.front()};
    graph.lane(lane_ids_.front());
    for (std::size_t i = 1; i < lane_ids_.size(); ++i) {
        const Lane& prev = graph.lane(lane_ids_[i - 1]);
        const int next = lane_ids_[i];
        graph.lane(next);
        const auto& succ = prev.successors();
        if (std::find(succ.begin(), succ.end(), next) != succ.end()) {
            chain.push_back(next);
        } else if (prev.left_neighbor() == next || prev.right_neighbor() == next) {
            chain.back() = next;
        } else {
            throw Error("route lanes " + std::to_string(prev.id()) + " -> " + std::to_string(next) +
                        " are not connected");
        }
    }
    std::vector<Vec2> pts;
    for (int id : chain) {
        for (const Vec2& p : graph.lane(id).centerline().points()) {
            if (!pts.empty() && distance(pts.back(), p) < 1e-9) continue;
            pts.push_back(p);
        }
    }
    path_ = Polyline(std::move(pts));
    lane_width_ = graph.lane(chain.front()).width();
}

bool Route::contains_lane(int id) const
{
    return std::find(lane_ids_.begin(), lane_ids_.end(), id) != lane_ids_.end();
}

bool Route::in_corridor(Vec2 p, const LaneGraph& graph) const
{
    return std::any_of(lane_ids_.begin(), lane_ids_.end(),
                       [&](int id) { return point_in_polygon(p, graph.lane(id).polygon()); });
}

} // namespace cloop
