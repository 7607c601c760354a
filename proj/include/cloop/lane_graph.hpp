#pragma once

#include "cloop/geometry.hpp"

#include <map>
#include <optional>
#include <vector>

namespace cloop {

struct PolylineProjection
{
    double arc_length = 0.0;
    double lateral_offset = 0.0; // positive to the left of travel direction
    double tangent_heading = 0.0;
    Vec2 point;
};

/// Polyline with cumulative arc length. Queries beyond the ends extrapolate
/// along the first/last segment; projections clamp to the ends.
class Polyline
{
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> points);

    const std::vector<Vec2>& points() const { return points_; }
    const std::vector<double>& arc_lengths() const { return s_; }
    double length() const { return s_.empty() ? 0.0 : s_.back(); }

    Vec2 point_at(double s) const;
    double heading_at(double s) const;
    /// Heading change per meter, estimated over a +-2 m window.
    double curvature_at(double s) const;
    Vec2 normal_at(double s) const;
    PolylineProjection project(Vec2 p) const;

private:
    std::size_t segment_index(double s) const;

    std::vector<Vec2> points_;
    std::vector<double> s_;
};

struct LaneSpec
{
    int id = 0;
    std::vector<Vec2> centerline;
    double width = 3.5;
    double speed_limit = 15.0;
    std::vector<int> successors;
    std::optional<int> left_neighbor;
    std::optional<int> right_neighbor;
};

class Lane
{
public:
    explicit Lane(LaneSpec spec);

    int id() const { return spec_.id; }
    const LaneSpec& spec() const { return spec_; }
    const Polyline& centerline() const { return centerline_; }
    double length() const { return centerline_.length(); }
    double width() const { return spec_.width; }
    double speed_limit() const { return spec_.speed_limit; }
    const std::vector<int>& successors() const { return spec_.successors; }
    std::optional<int> left_neighbor() const { return spec_.left_neighbor; }
    std::optional<int> right_neighbor() const { return spec_.right_neighbor; }
    /// Centerline offset by +-width/2 with miter joins.
    const Polygon& polygon() const { return polygon_; }

private:
    LaneSpec spec_;
    Polyline centerline_;
    Polygon polygon_;
};

struct CenterlineProjection
{
    double arc_length = 0.0;
    double lateral_offset = 0.0;
    double heading_error = 0.0;
};

CenterlineProjection project_to_centerline(const Pose2D& p, const Lane& lane);

struct LanePosition
{
    int lane_id = 0;
    double arc_length = 0.0;
    double lateral_offset = 0.0;
    double heading_error = 0.0;
};

/// Immutable lane graph. Construction validates references, neighbor
/// symmetry and polygon simplicity.
class LaneGraph
{
public:
    LaneGraph() = default;
    explicit LaneGraph(std::vector<LaneSpec> lanes);

    const std::map<int, Lane>& lanes() const { return lanes_; }
    bool has_lane(int id) const { return lanes_.count(id) != 0; }
    const Lane& lane(int id) const;
    bool empty() const { return lanes_.empty(); }

    bool in_drivable_area(Vec2 p) const;
    /// 0 inside the drivable union, else distance to the nearest lane polygon.
    double distance_outside(Vec2 p) const;

    /// Lane containing the point laterally, heading within 90 degrees, with
    /// the smallest |lateral offset|. A valid hint lane is preferred.
    std::optional<LanePosition> locate(const Pose2D& p, std::optional<int> hint = std::nullopt) const;

    std::vector<LaneSpec> specs() const;

private:
    std::map<int, Lane> lanes_;
};

/// Ego route: ordered lanes linked by successor or neighbor relations.
/// The reference path concatenates successor-linked centerlines; a neighbor
/// link replaces the preceding lane with its neighbor (a lane change).
class Route
{
public:
    Route() = default;
    Route(std::vector<int> lane_ids, const LaneGraph& graph);

    const std::vector<int>& lane_ids() const { return lane_ids_; }
    const Polyline& path() const { return path_; }
    double total_length() const { return path_.length(); }
    double lane_width() const { return lane_width_; }
    bool contains_lane(int id) const;
    /// Footprint center inside the union of the route lanes' polygons.
    bool in_corridor(Vec2 p, const LaneGraph& graph) const;

private:
    std::vector<int> lane_ids_;
    Polyline path_;
    double lane_width_ = 3.5;
};

} // namespace cloop
