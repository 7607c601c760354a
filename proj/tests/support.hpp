#pragma once

#include "cloop/geometry.hpp"
#include "cloop/lane_graph.hpp"
#include "cloop/scenario.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace testing_support {

using namespace cloop;

inline LaneSpec straight_lane(int id, double y, double length = 500.0, double limit = 15.0,
                              std::optional<int> left = std::nullopt, std::optional<int> right = std::nullopt)
{
    LaneSpec s;
    s.id = id;
    s.centerline = {{0.0, y}, {length, y}};
    s.speed_limit = limit;
    s.left_neighbor = left;
    s.right_neighbor = right;
    return s;
}

/// Lane 1 at y=0 and, optionally, lane 2 to its left at y=3.5.
inline std::shared_ptr<LaneGraph> road(bool two_lanes = false, double length = 500.0)
{
    std::vector<LaneSpec> lanes;
    if (two_lanes) {
        lanes.push_back(straight_lane(1, 0.0, length, 15.0, 2));
        lanes.push_back(straight_lane(2, 3.5, length, 15.0, std::nullopt, 1));
    } else {
        lanes.push_back(straight_lane(1, 0.0, length));
    }
    return std::make_shared<LaneGraph>(lanes);
}

inline AgentState vehicle(int id, double x, double y, double v, double heading = 0.0)
{
    AgentState a;
    a.id = id;
    a.pose = Pose2D(x, y, heading);
    a.speed = v;
    return a;
}

/// Constant-velocity logged future for every agent and the ego.
inline Trajectory straight_future(const AgentState& a, int steps, double dt)
{
    Trajectory t;
    for (int k = 0; k <= steps; ++k) {
        const Vec2 p = a.pose.position() + a.velocity() * (k * dt);
        t.push_back({k * dt, Pose2D(p, a.pose.heading()), a.speed});
    }
    return t;
}

inline Scenario scenario(std::shared_ptr<LaneGraph> graph, AgentState ego, std::vector<AgentState> agents,
                         int horizon = 50, std::vector<int> route = {1})
{
    Scenario s;
    s.id = "test";
    s.tag = "test";
    s.lane_graph = graph;
    s.ego = ego;
    s.agents = std::move(agents);
    s.route = Route(route, *graph);
    s.horizon_steps = horizon;
    s.logged_futures[kEgoId] = straight_future(s.ego, horizon, s.dt);
    for (const auto& a : s.agents) s.logged_futures[a.id] = straight_future(a, horizon, s.dt);
    return s;
}

} // namespace testing_support
