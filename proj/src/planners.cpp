#include "cloop/planners.hpp"

#include "cloop/error.hpp"

#include <algorithm>
#include <cmath>

namespace cloop {

namespace {

int horizon_samples(double horizon, double dt)
{
    return static_cast<int>(std::lround(horizon / dt));
}

double mid_angle(double a, double b)
{
    return a + 0.5 * normalize_angle(b - a);
}

// Heading interpolated between vertex headings, so the sweep has no kinks.
double smooth_heading(const Polyline& path, double s)
{
    const auto& pts = path.points();
    const auto& sv = path.arc_lengths();
    const std::size_t n = pts.size();
    if (n <= 2 || s <= 0.0 || s >= path.length()) return path.heading_at(s);
    std::size_t i = static_cast<std::size_t>(std::upper_bound(sv.begin(), sv.end(), s) - sv.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
    auto seg = [&](std::size_t j) {
        const Vec2 d = pts[j + 1] - pts[j];
        return std::atan2(d.y, d.x);
    };
    const double h0 = i == 0 ? seg(0) : mid_angle(seg(i - 1), seg(i));
    const double h1 = i + 2 == n ? seg(i) : mid_angle(seg(i), seg(i + 1));
    const double t = (s - sv[i]) / (sv[i + 1] - sv[i]);
    return h0 + t * normalize_angle(h1 - h0);
}

// Quintic in arc length from (d0, slope0, curvature0) to (target, 0, 0) over `length`.
class LateralProfile
{
public:
    LateralProfile(const PathState& start, double target, double speed)
        : s0_(start.s), target_(target)
    {
        const double swing = std::abs(target - start.d);
        const double duration = std::max(3.0, std::sqrt(5.77 * swing / 1.5));
        length_ = std::max(10.0, speed * duration);
        const double a1 = start.slope * length_;
        const double a2 = 0.5 * start.curvature * length_ * length_;
        const double c0 = target - start.d - a1 - a2;
        const double c1 = -a1 - 2.0 * a2;
        const double c2 = -2.0 * a2;
        a_ = {start.d,
              a1,
              a2,
              10.0 * c0 - 4.0 * c1 + 0.5 * c2,
              -15.0 * c0 + 7.0 * c1 - c2,
              6.0 * c0 - 3.0 * c1 + 0.5 * c2};
    }

    double offset(double s) const
    {
        const double u = (s - s0_) / length_;
        if (u >= 1.0) return target_;
        if (u <= 0.0) return a_[0];
        return a_[0] + u * (a_[1] + u * (a_[2] + u * (a_[3] + u * (a_[4] + u * a_[5]))));
    }

    double slope(double s) const
    {
        const double u = (s - s0_) / length_;
        if (u >= 1.0 || u < 0.0) return u < 0.0 ? a_[1] / length_ : 0.0;
        const double du = a_[1] + u * (2.0 * a_[2] + u * (3.0 * a_[3] + u * (4.0 * a_[4] + u * 5.0 * a_[5])));
        return du / length_;
    }

private:
    double s0_;
    double target_;
    double length_ = 10.0;
    std::array<double, 6> a_{};
};

Pose2D path_pose(const Polyline& path, const LateralProfile& lat, double s)
{
    const double h = smooth_heading(path, s);
    const Vec2 n{-std::sin(h), std::cos(h)};
    return Pose2D(path.point_at(s) + n * lat.offset(s), h + std::atan(lat.slope(s)));
}

double route_speed_limit(const PlannerObservation& obs)
{
    std::optional<int> hint;
    if (!obs.route.lane_ids().empty()) hint = obs.route.lane_ids().front();
    if (auto pos = obs.lane_graph.locate(obs.world.ego.pose, hint)) return obs.lane_graph.lane(pos->lane_id).speed_limit();
    double limit = 0.0;
    for (int id : obs.route.lane_ids()) limit = std::max(limit, obs.lane_graph.lane(id).speed_limit());
    if (limit <= 0.0) throw Error("planner: route has no lanes");
    return limit;
}

struct PathAgent
{
    int id;
    double s;
    double d_min;
    double d_max;
    double speed;
    double length;
};

std::vector<PathAgent> agents_on_path(const PlannerObservation& obs, const PathState& start)
{
    const Polyline& path = obs.route.path();
    std::vector<PathAgent> out;
    for (const AgentState& a : obs.world.agents) {
        const PolylineProjection c = path.project(a.pose.position());
        const double ahead = c.arc_length - start.s;
        if (ahead <= 0.0 || ahead > kLeaderLookahead + a.length) continue;
        PathAgent pa{a.id, c.arc_length, c.lateral_offset, c.lateral_offset, 0.0, a.length};
        for (const Vec2& v : a.footprint()) {
            const double d = path.project(v).lateral_offset;
            pa.d_min = std::min(pa.d_min, d);
            pa.d_max = std::max(pa.d_max, d);
        }
        pa.speed = a.speed * std::cos(normalize_angle(a.pose.heading() - smooth_heading(path, c.arc_length)));
        out.push_back(pa);
    }
    return out;
}

std::optional<PathLeader> leader_from(const std::vector<PathAgent>& agents, const LateralProfile& lat,
                                      double half_band)
{
    std::optional<PathLeader> best;
    for (const PathAgent& a : agents) {
        const double c = lat.offset(a.s);
        if (a.d_max < c - half_band || a.d_min > c + half_band) continue;
        if (!best || a.s < best->s) best = PathLeader{a.id, a.s, a.speed, a.length};
    }
    return best;
}

PlannedTrajectory sweep(const PlannerObservation& obs, const IdmParams* p, const LateralProfile& lat,
                        const std::optional<PathLeader>& leader, const PathState& start, double horizon)
{
    const double dt = obs.dt;
    const AgentState& ego = obs.world.ego;
    const Polyline& path = obs.route.path();
    const int n = horizon_samples(horizon, dt);
    PlannedTrajectory traj;
    traj.reserve(static_cast<std::size_t>(n) + 1);
    traj.push_back({obs.sim_time, ego.pose, ego.speed});
    double s = start.s;
    double v = ego.speed;
    for (int i = 1; i <= n; ++i) {
        double a = -kPlanMaxAccel;
        if (p) {
            const double t = (i - 1) * dt;
            if (leader) {
                const double gap = leader->s + leader->speed * t - s - 0.5 * (ego.length + leader->length);
                a = gap <= 0.01 ? -kPlanMaxAccel : idm_acceleration(v, gap, v - leader->speed, *p);
            } else {
                a = idm_acceleration(v, kFreeRoad, 0.0, *p);
            }
            a = std::clamp(a, -kPlanMaxAccel, kPlanMaxAccel);
        }
        const double v_next = std::max(0.0, v + a * dt);
        s += 0.5 * (v + v_next) * dt;
        v = v_next;
        traj.push_back({obs.sim_time + i * dt, path_pose(path, lat, s), v});
    }
    return traj;
}

} // namespace

PlannedTrajectory ConstantVelocityPlanner::plan(const PlannerObservation& obs)
{
    const AgentState& ego = obs.world.ego;
    const double dt = obs.dt;
    const int n = horizon_samples(kPlanHorizon, dt);
    PlannedTrajectory traj;
    const Vec2 vel = ego.velocity();
    for (int i = 0; i <= n; ++i)
        traj.push_back({obs.sim_time + i * dt, Pose2D(ego.pose.position() + vel * (i * dt), ego.pose.heading()),
                        ego.speed});
    return traj;
}

void LogReplayPlanner::reset(const Scenario& scn)
{
    const Trajectory* log = scn.logged(kEgoId);
    log_ = log ? *log : Trajectory{};
}

PlannedTrajectory LogReplayPlanner::plan(const PlannerObservation& obs)
{
    if (log_.empty()) throw Error("log replay planner: scenario has no logged ego future");
    const double dt = obs.dt;
    const std::size_t k = static_cast<std::size_t>(std::max(0, obs.world.step_index));
    if (k >= log_.size()) throw Error("log replay planner: logged ego future exhausted");
    const std::size_t n = static_cast<std::size_t>(horizon_samples(kPlanHorizon, dt));
    PlannedTrajectory traj;
    for (std::size_t i = 0; i <= n; ++i) {
        const std::size_t j = std::min(k + i, log_.size() - 1);
        TrajectorySample s = log_[j];
        if (k + i >= log_.size()) s.speed = 0.0;
        s.t = obs.sim_time + static_cast<double>(i) * dt;
        traj.push_back(s);
    }
    return traj;
}

PathState path_state(const AgentState& ego, const Route& route, const AgentState* previous)
{
    if (route.lane_ids().empty()) throw Error("planner: empty route");
    const PolylineProjection p = route.path().project(ego.pose.position());
    PathState st;
    st.s = p.arc_length;
    st.d = p.lateral_offset;
    const double err = normalize_angle(ego.pose.heading() - smooth_heading(route.path(), p.arc_length));
    st.slope = std::tan(std::clamp(err, -0.5, 0.5));
    if (previous) {
        const double ds = distance(ego.pose.position(), previous->pose.position());
        if (ds > 1e-3) {
            const double ego_k = normalize_angle(ego.pose.heading() - previous->pose.heading()) / ds;
            const double path_k = (smooth_heading(route.path(), p.arc_length + 0.5 * ds) -
                                   smooth_heading(route.path(), p.arc_length - 0.5 * ds)) / ds;
            st.curvature = std::clamp(ego_k - path_k, -kPlanMaxCurvature, kPlanMaxCurvature);
        }
    }
    return st;
}

std::optional<PathLeader> path_leader(const PlannerObservation& obs, const PathState& start, double target_offset)
{
    const LateralProfile lat(start, target_offset, obs.world.ego.speed);
    return leader_from(agents_on_path(obs, start), lat, 0.5 * obs.route.lane_width());
}

PlannedTrajectory idm_profile(const PlannerObservation& obs, const IdmParams& p, double target_offset, double horizon)
{
    const PathState start = path_state(obs.world.ego, obs.route, obs.world.past(kEgoId, 1));
    const LateralProfile lat(start, target_offset, obs.world.ego.speed);
    const auto leader = leader_from(agents_on_path(obs, start), lat, 0.5 * obs.route.lane_width());
    return sweep(obs, &p, lat, leader, start, horizon);
}

PlannedTrajectory brake_profile(const PlannerObservation& obs, double horizon)
{
    const PathState start = path_state(obs.world.ego, obs.route, obs.world.past(kEgoId, 1));
    const LateralProfile lat(start, start.d, obs.world.ego.speed);
    return sweep(obs, nullptr, lat, std::nullopt, start, horizon);
}

PlannedTrajectory IdmPlanner::plan(const PlannerObservation& obs)
{
    IdmParams p = params_;
    if (use_lane_speed_limit_) p.v0 = route_speed_limit(obs);
    p.validate();
    return idm_profile(obs, p, 0.0);
}

bool proposal_better(const Proposal& a, const Proposal& b)
{
    if (a.score.composite != b.score.composite) return a.score.composite > b.score.composite;
    if (std::abs(a.offset) != std::abs(b.offset)) return std::abs(a.offset) < std::abs(b.offset);
    return a.speed_fraction > b.speed_fraction;
}

std::vector<Proposal> CenterlinePlanner::score_proposals(const PlannerObservation& obs) const
{
    const double limit = route_speed_limit(obs);
    const PathState start = path_state(obs.world.ego, obs.route, obs.world.past(kEgoId, 1));
    const auto agents = agents_on_path(obs, start);
    const double dt = obs.dt;
    const int n = horizon_samples(kPlanHorizon, dt);

    std::vector<Proposal> proposals;
    std::vector<RolloutLog> logs;
    for (double offset : params_.offsets) {
        const LateralProfile lat(start, offset, obs.world.ego.speed);
        const auto leader = leader_from(agents, lat, 0.5 * obs.route.lane_width());
        for (double frac : params_.speed_fractions) {
            IdmParams p = params_.idm;
            p.v0 = frac * limit;
            p.validate();
            Proposal prop;
            prop.offset = offset;
            prop.speed_fraction = frac;
            prop.trajectory = sweep(obs, &p, lat, leader, start, kPlanHorizon);

            RolloutLog log;
            log.dt = dt;
            log.snapshots.reserve(static_cast<std::size_t>(n) + 1);
            for (int k = 0; k <= n; ++k) {
                WorldSnapshot snap;
                snap.ego = obs.world.ego;
                snap.ego.pose = prop.trajectory[static_cast<std::size_t>(k)].pose;
                snap.ego.speed = prop.trajectory[static_cast<std::size_t>(k)].speed;
                snap.agents = obs.world.agents;
                for (auto& a : snap.agents) a.pose = Pose2D(a.pose.position() + a.velocity() * (k * dt), a.pose.heading());
                log.snapshots.push_back(std::move(snap));
            }
            proposals.push_back(std::move(prop));
            logs.push_back(std::move(log));
        }
    }

    double reference = 0.0;
    std::vector<double> progress(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        progress[i] = ego_progress(logs[i], obs.route);
        reference = std::max(reference, progress[i]);
    }
    const MetricConfig& cfg = params_.metrics;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        HardMultipliers hard;
        for (const auto& e : detect_collisions(logs[i]))
            if (classify_at_fault(e, logs[i], obs.route, obs.lane_graph, cfg)) hard.at_fault_collision = true;
        hard.drivable_area_violation = drivable_area_compliance(logs[i], obs.lane_graph, cfg);
        SoftMetrics soft;
        soft.ttc = time_to_collision_score(logs[i], cfg).score;
        soft.progress = reference < kMinReferenceProgress ? 1.0 : std::clamp(progress[i] / reference, 0.0, 1.0);
        soft.comfort = comfort_score(logs[i], cfg.comfort).score;
        soft.speed_limit = speed_limit_score(logs[i], obs.lane_graph);
        proposals[i].score = compose_cls(soft, hard, cfg.weights);
    }
    return proposals;
}

PlannedTrajectory CenterlinePlanner::plan(const PlannerObservation& obs)
{
    auto proposals = score_proposals(obs);
    const Proposal* best = nullptr;
    for (const auto& p : proposals)
        if (!best || proposal_better(p, *best)) best = &p;
    if (!best || best->score.composite <= 0.0) return brake_profile(obs);
    return best->trajectory;
}

std::unique_ptr<Planner> make_planner(const std::string& name, const IdmParams& idm, const MetricConfig& metrics)
{
    if (name == "constant_velocity") return std::make_unique<ConstantVelocityPlanner>();
    if (name == "log_replay") return std::make_unique<LogReplayPlanner>();
    if (name == "idm") return std::make_unique<IdmPlanner>(idm);
    if (name == "centerline") {
        CenterlinePlannerParams p;
        p.idm = idm;
        p.metrics = metrics;
        return std::make_unique<CenterlinePlanner>(p);
    }
    throw Error("unknown planner '" + name + "'");
}

std::vector<std::string> planner_names()
{
    return {"constant_velocity", "log_replay", "idm", "centerline"};
}

} // namespace cloop
