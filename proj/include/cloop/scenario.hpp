#pragma once

#include "cloop/geometry.hpp"
#include "cloop/lane_graph.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace cloop {

enum class AgentKind { vehicle, static_object };

struct AgentState
{
    int id = 0;
    Pose2D pose;
    double speed = 0.0;        // m/s along heading, >= 0
    double acceleration = 0.0; // m/s^2
    double length = 4.5;
    double width = 2.0;
    AgentKind kind = AgentKind::vehicle;

    OrientedBox footprint() const { return make_box(pose, length, width); }
    Vec2 velocity() const { return rotate({speed, 0.0}, pose.heading()); }
    bool operator==(const AgentState&) const = default;
};

/// Throws if footprint dimensions or speed are out of range.
void validate_agent(const AgentState& a);

inline OrientedBox footprint_polygon(const AgentState& a) { return a.footprint(); }

struct TrajectorySample
{
    double t = 0.0;
    Pose2D pose;
    double speed = 0.0;
    bool operator==(const TrajectorySample&) const = default;
};

using Trajectory = std::vector<TrajectorySample>;

constexpr int kEgoId = 0;
constexpr double kDefaultDt = 0.1;
constexpr int kDefaultHorizonSteps = 150;

struct Scenario
{
    std::string id;
    std::string tag;
    std::shared_ptr<const LaneGraph> lane_graph = std::make_shared<LaneGraph>();
    AgentState ego;
    std::vector<AgentState> agents;
    Route route;
    int horizon_steps = kDefaultHorizonSteps;
    double dt = kDefaultDt;
    /// Ground-truth states at 10 Hz keyed by agent id (the ego uses kEgoId).
    /// Sample k is the state at time k*dt; sample 0 is the initial state.
    std::map<int, Trajectory> logged_futures;

    double horizon_seconds() const { return horizon_steps * dt; }
    const Trajectory* logged(int agent_id) const;
};

/// Checks the scenario invariants: unique ids, valid agents, log coverage.
void validate_scenario(const Scenario& s);

} // namespace cloop
