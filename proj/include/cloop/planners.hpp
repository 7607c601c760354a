#pragma once

#include "cloop/engine.hpp"
#include "cloop/idm.hpp"
#include "cloop/metrics.hpp"

#include <memory>
#include <string>
#include <vector>

namespace cloop {

constexpr double kPlanHorizon = 4.0;   // s
constexpr double kPlanMaxAccel = 3.0;  // m/s^2, both directions
constexpr double kPlanMaxCurvature = 0.2;

class ConstantVelocityPlanner final : public Planner
{
public:
    std::string name() const override { return "constant_velocity"; }
    PlannedTrajectory plan(const PlannerObservation& obs) override;
};

/// Replays the logged ego future from the current tick.
class LogReplayPlanner final : public Planner
{
public:
    std::string name() const override { return "log_replay"; }
    void reset(const Scenario& scn) override;
    PlannedTrajectory plan(const PlannerObservation& obs) override;

private:
    Trajectory log_;
};

/// Lateral state of the ego relative to the route path.
struct PathState
{
    double s = 0.0;
    double d = 0.0;
    double slope = 0.0; // dd/ds
    double curvature = 0.0; // d2d/ds2
};

/// Frenet state along the route path. The curvature term comes from the motion
/// between `previous` and `ego`; it is zero without a previous state.
PathState path_state(const AgentState& ego, const Route& route, const AgentState* previous = nullptr);

struct PathLeader
{
    int id = -1;
    double s = 0.0;     // arc length of the leader center
    double speed = 0.0; // along the path
    double length = 0.0;
};

/// Nearest agent ahead, within 100 m, whose footprint overlaps the band of
/// half a lane width around the planned lateral profile.
std::optional<PathLeader> path_leader(const PlannerObservation& obs, const PathState& start, double target_offset);

/// Longitudinal IDM profile behind a constant-velocity leader, swept along
/// the route path while the lateral offset converges to `target_offset`.
PlannedTrajectory idm_profile(const PlannerObservation& obs, const IdmParams& p, double target_offset,
                              double horizon = kPlanHorizon);

/// Constant deceleration at kPlanMaxAccel along the current lateral offset.
PlannedTrajectory brake_profile(const PlannerObservation& obs, double horizon = kPlanHorizon);

class IdmPlanner final : public Planner
{
public:
    explicit IdmPlanner(IdmParams params = {}, bool use_lane_speed_limit = true)
        : params_(params), use_lane_speed_limit_(use_lane_speed_limit)
    {
    }
    std::string name() const override { return "idm"; }
    PlannedTrajectory plan(const PlannerObservation& obs) override;

private:
    IdmParams params_;
    bool use_lane_speed_limit_;
};

struct Proposal
{
    double offset = 0.0;
    double speed_fraction = 1.0;
    PlannedTrajectory trajectory;
    ClosedLoopScore score;
};

struct CenterlinePlannerParams
{
    std::vector<double> offsets{-1.0, 0.0, 1.0};
    std::vector<double> speed_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
    IdmParams idm;
    MetricConfig metrics;
};

/// Ordering used to pick the winning proposal: higher composite, then
/// smaller |offset|, then higher speed fraction.
bool proposal_better(const Proposal& a, const Proposal& b);

class CenterlinePlanner final : public Planner
{
public:
    explicit CenterlinePlanner(CenterlinePlannerParams params = {}) : params_(std::move(params)) {}
    std::string name() const override { return "centerline"; }
    PlannedTrajectory plan(const PlannerObservation& obs) override;

    /// All proposals with their scores on a constant-velocity forecast.
    std::vector<Proposal> score_proposals(const PlannerObservation& obs) const;
    const CenterlinePlannerParams& params() const { return params_; }

private:
    CenterlinePlannerParams params_;
};

/// Names: constant_velocity, log_replay, idm, centerline.
std::unique_ptr<Planner> make_planner(const std::string& name, const IdmParams& idm = {},
                                      const MetricConfig& metrics = {});
std::vector<std::string> planner_names();

} // namespace cloop
