#include "cloop/engine.hpp"

#include "cloop/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace cloop {

void validate_planned(const PlannedTrajectory& traj, double sim_time, double dt)
{
    const std::size_t min_samples = static_cast<std::size_t>(std::lround(0.5 / dt)) + 1;
    if (traj.size() < min_samples) throw Error("planned trajectory shorter than 0.5 s");
    if (std::abs(traj.front().t - sim_time) > 1e-6) throw Error("planned trajectory does not start at sim time");
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj[i];
        if (!std::isfinite(s.t) || !std::isfinite(s.pose.x) || !std::isfinite(s.pose.y) ||
            !std::isfinite(s.pose.heading()) || !std::isfinite(s.speed))
            throw Error("planned trajectory has non-finite values at sample " + std::to_string(i));
        if (s.speed < 0.0) throw Error("planned trajectory has negative speed at sample " + std::to_string(i));
        if (i > 0 && std::abs(s.t - traj[i - 1].t - dt) > 1e-6)
            throw Error("planned trajectory samples are not spaced by dt at sample " + std::to_string(i));
    }
}

std::string to_string(TrackerMode m)
{
    return m == TrackerMode::perfect ? "perfect" : "kinematic";
}

TrackerMode tracker_from_string(const std::string& s)
{
    if (s == "perfect") return TrackerMode::perfect;
    if (s == "kinematic") return TrackerMode::kinematic;
    throw Error("unknown tracker mode '" + s + "'");
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::completed: return "completed";
    case Termination::planner_error: return "planner_error";
    case Termination::internal_error: return "internal_error";
    }
    return "unknown";
}

AgentState track(const AgentState& current, const PlannedTrajectory& traj, TrackerMode mode, double dt,
                 const KinematicTrackerParams& params)
{
    if (traj.size() < 2) throw Error("tracker needs at least two trajectory samples");
    AgentState next = current;
    if (mode == TrackerMode::perfect) {
        next.pose = traj[1].pose;
        next.speed = traj[1].speed;
        next.acceleration = (next.speed - current.speed) / dt;
        return next;
    }

    const double lookahead = std::max(params.min_lookahead, params.lookahead_time * current.speed);
    const TrajectorySample* target = &traj.back();
    for (std::size_t i = 1; i < traj.size(); ++i) {
        if (distance(traj[i].pose.position(), current.pose.position()) >= lookahead) {
            target = &traj[i];
            break;
        }
    }
    const Vec2 local = to_local(current.pose, target->pose.position());
    const double ld2 = dot(local, local);
    double curvature = ld2 > 1e-12 ? 2.0 * local.y / ld2 : 0.0;
    curvature = std::clamp(curvature, -params.max_curvature, params.max_curvature);
    const double steer = std::atan(curvature * params.wheelbase);
    const double accel =
        std::clamp(params.speed_gain * (traj[1].speed - current.speed), params.min_accel, params.max_accel);

    const double h = dt / params.substeps;
    double x = current.pose.x;
    double y = current.pose.y;
    double heading = current.pose.heading();
    double v = current.speed;
    for (int i = 0; i < params.substeps; ++i) {
        const double v_next = std::max(0.0, v + accel * h);
        const double v_mid = 0.5 * (v + v_next);
        x += v_mid * std::cos(heading) * h;
        y += v_mid * std::sin(heading) * h;
        heading += v_mid * std::tan(steer) / params.wheelbase * h;
        v = v_next;
    }
    next.pose = Pose2D(x, y, heading);
    next.speed = v;
    next.acceleration = (v - current.speed) / dt;
    return next;
}

WorldState step(const WorldState& world, const PlannedTrajectory& plan, Background& background, const Scenario& scn,
                TrackerMode tracker)
{
    std::vector<AgentState> agents = background.step(world, scn);
    if (agents.size() != world.agents.size()) throw Error("background returned a different number of agents");
    WorldState next = world;
    next.push_history();
    next.ego = track(world.ego, plan, tracker, scn.dt);
    next.agents = std::move(agents);
    next.step_index = world.step_index + 1;
    next.sim_time = next.step_index * scn.dt;
    return next;
}

RolloutLog run_scenario(const Scenario& scn, Planner& planner, Background& background, TrackerMode tracker,
                        std::uint64_t seed)
{
    validate_scenario(scn);
    RolloutLog log;
    log.scenario_id = scn.id;
    log.planner = planner.name();
    log.background = background.kind();
    log.tracker = tracker;
    log.dt = scn.dt;

    planner.reset(scn);
    background.reset(scn, seed);
    WorldState world = initial_world(scn);
    log.snapshots.push_back(world.snapshot());

    for (int k = 0; k < scn.horizon_steps; ++k) {
        PlannedTrajectory plan;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            plan = planner.plan(PlannerObservation{world, *scn.lane_graph, scn.route, world.sim_time, scn.dt});
            validate_planned(plan, world.sim_time, scn.dt);
        } catch (const std::exception& e) {
            log.termination = Termination::planner_error;
            log.error = e.what();
            break;
        }
        const auto t1 = std::chrono::steady_clock::now();
        log.planner_latency_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        world = step(world, plan, background, scn, tracker);
        log.snapshots.push_back(world.snapshot());
    }
    return log;
}

} // namespace cloop
