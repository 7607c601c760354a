#pragma once

#include "cloop/background.hpp"
#include "cloop/scenario.hpp"
#include "cloop/world.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cloop {

/// Ego plan: samples at dt spacing, the first at the current sim time.
using PlannedTrajectory = Trajectory;

/// Throws Error describing the first violated trajectory invariant.
void validate_planned(const PlannedTrajectory& traj, double sim_time, double dt);

struct PlannerObservation
{
    const WorldState& world;
    const LaneGraph& lane_graph;
    const Route& route;
    double sim_time;
    double dt = kDefaultDt;
};

class Planner
{
public:
    virtual ~Planner() = default;
    virtual std::string name() const = 0;
    /// Called once before a rollout.
    virtual void reset(const Scenario&) {}
    virtual PlannedTrajectory plan(const PlannerObservation& obs) = 0;
};

enum class TrackerMode { perfect, kinematic };

std::string to_string(TrackerMode m);
TrackerMode tracker_from_string(const std::string& s);

struct KinematicTrackerParams
{
    double wheelbase = 3.1;
    double min_lookahead = 3.0;
    double lookahead_time = 0.5;
    double speed_gain = 1.0;
    double max_curvature = 0.2;
    double min_accel = -4.0;
    double max_accel = 3.0;
    int substeps = 10;
};

/// Advances `current` by one tick along `traj`. Perfect mode returns the next
/// trajectory sample; kinematic mode runs pure pursuit and proportional speed
/// control on a kinematic bicycle.
AgentState track(const AgentState& current, const PlannedTrajectory& traj, TrackerMode mode, double dt,
                 const KinematicTrackerParams& params = {});

/// internal_error is never produced by the engine; the runner uses it for
/// rollouts that could not be set up (for example a missing logged future).
enum class Termination { completed, planner_error, internal_error };

std::string to_string(Termination t);

struct RolloutLog
{
    std::string scenario_id;
    std::string planner;
    BackgroundKind background = BackgroundKind::non_reactive_replay;
    TrackerMode tracker = TrackerMode::perfect;
    double dt = kDefaultDt;
    std::vector<WorldSnapshot> snapshots;
    std::vector<double> planner_latency_ms; // wall clock, excluded from serialized outputs
    Termination termination = Termination::completed;
    std::string error;
};

/// One synchronous tick: the background sees the world at t, the ego follows
/// the plan, history rotates.
WorldState step(const WorldState& world, const PlannedTrajectory& plan, Background& background, const Scenario& scn,
                TrackerMode tracker);

/// Closed-loop rollout for scn.horizon_steps ticks. A planner exception or an
/// invalid plan truncates the rollout with Termination::planner_error.
RolloutLog run_scenario(const Scenario& scn, Planner& planner, Background& background, TrackerMode tracker,
                        std::uint64_t seed);

} // namespace cloop
