#pragma once

#include "cloop/lane_graph.hpp"
#include "cloop/world.hpp"

#include <limits>
#include <optional>

namespace cloop {

struct IdmParams
{
    double v0 = 15.0;           // desired speed, m/s
    double time_headway = 1.5;  // s
    double min_gap = 2.0;       // m
    double a_max = 1.5;         // m/s^2
    double b = 2.0;             // comfortable deceleration, m/s^2
    double delta = 4.0;

    void validate() const;
};

struct MobilParams
{
    double politeness = 0.0;
    double threshold = 0.1; // m/s^2
    double b_safe = 4.0;    // m/s^2

    void validate() const;
};

constexpr double kIdmMinAcceleration = -10.0;
constexpr double kFreeRoad = std::numeric_limits<double>::infinity();
constexpr double kLeaderLookahead = 100.0;

/// Intelligent Driver Model acceleration. `gap` is the bumper-to-bumper
/// distance (kFreeRoad without leader), `closing_speed` = v - v_leader.
/// Throws Error("overlapping leader") for a non-positive finite gap.
double idm_acceleration(double v, double gap, double closing_speed, const IdmParams& p);

struct Leader
{
    int id = 0;
    double gap = kFreeRoad;
    double closing_speed = 0.0;
};

/// Nearest agent ahead whose footprint center lies on the agent's lane or
/// its successors within the lookahead. Agents in neighbor lanes are never
/// returned, however close they are.
std::optional<Leader> select_leader(const AgentState& agent, const WorldState& world, const LaneGraph& graph,
                                    std::optional<int> lane_hint = std::nullopt);

enum class LaneChange { keep, change_left, change_right };

LaneChange mobil_decide(const AgentState& agent, const WorldState& world, const LaneGraph& graph,
                        const MobilParams& mp, const IdmParams& ip, std::optional<int> lane_hint = std::nullopt);

struct IdmStepResult
{
    AgentState state;
    std::optional<int> lane_id; // lane the agent ended on, if still mapped
};

struct IdmStepOptions
{
    /// Desired speed taken from the lane speed limit instead of p.v0.
    bool use_lane_speed_limit = false;
    /// Lateral offset decays toward the centerline at this rate (m/s);
    /// zero keeps the offset fixed.
    double lateral_relax_speed = 0.0;
    /// Project onto the hint lane even when laterally outside it (used
    /// while executing a lane change).
    bool force_lane = false;
};

/// Euler update of one IDM agent: speed from the IDM law (clamped >= 0),
/// position advanced along the lane centerline. Agents off the lane graph
/// continue at constant velocity.
IdmStepResult idm_agent_step(const AgentState& agent, const WorldState& world, const LaneGraph& graph,
                             const IdmParams& p, double dt, std::optional<int> lane_hint = std::nullopt,
                             const IdmStepOptions& options = {});

} // namespace cloop
