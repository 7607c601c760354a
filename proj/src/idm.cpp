#include "cloop/idm.hpp"

#include "cloop/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cloop {

void IdmParams::validate() const
{
    if (!(v0 > 0 && time_headway > 0 && min_gap > 0 && a_max > 0 && b > 0))
        throw Error("IDM parameters must be positive");
    if (!(delta >= 1.0)) throw Error("IDM delta must be >= 1");
}

void MobilParams::validate() const
{
    if (!(politeness >= 0.0 && politeness <= 1.0)) throw Error("MOBIL politeness must lie in [0,1]");
    if (!(b_safe > 0.0)) throw Error("MOBIL b_safe must be positive");
}

double idm_acceleration(double v, double gap, double closing_speed, const IdmParams& p)
{
    const bool has_leader = std::isfinite(gap);
    if (has_leader && gap <= 0.0) throw Error("overlapping leader");
    const double free_term = std::pow(v / p.v0, p.delta);
    double interaction = 0.0;
    if (has_leader) {
        const double dynamic = v * p.time_headway + v * closing_speed / (2.0 * std::sqrt(p.a_max * p.b));
        const double desired_gap = p.min_gap + std::max(0.0, dynamic);
        interaction = (desired_gap / gap) * (desired_gap / gap);
    }
    return std::max(kIdmMinAcceleration, p.a_max * (1.0 - free_term - interaction));
}

namespace {

struct WalkItem
{
    int lane_id;
    double offset; // arc distance from the agent to the start of this lane
};

std::vector<WalkItem> lane_walk(const LanePosition& pos, const LaneGraph& graph)
{
    std::vector<WalkItem> items{{pos.lane_id, -pos.arc_length}};
    std::set<int> visited{pos.lane_id};
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Lane& lane = graph.lane(items[i].lane_id);
        const double next_offset = items[i].offset + lane.length();
        if (next_offset > kLeaderLookahead) continue;
        for (int succ : lane.successors())
            if (visited.insert(succ).second) items.push_back({succ, next_offset});
    }
    return items;
}

template <typename Fn>
void for_each_other(const WorldState& world, int self, Fn&& fn)
{
    if (world.ego.id != self) fn(world.ego);
    for (const auto& a : world.agents)
        if (a.id != self) fn(a);
}

double accel_with(const AgentState& a, const std::optional<Leader>& leader, const IdmParams& p)
{
    if (!leader) return idm_acceleration(a.speed, kFreeRoad, 0.0, p);
    if (leader->gap <= 0.0) return kIdmMinAcceleration;
    return idm_acceleration(a.speed, leader->gap, leader->closing_speed, p);
}

WorldState replace_agent(const WorldState& world, const AgentState& replacement)
{
    WorldState w = world;
    if (w.ego.id == replacement.id) w.ego = replacement;
    for (auto& a : w.agents)
        if (a.id == replacement.id) a = replacement;
    return w;
}

WorldState remove_agent(const WorldState& world, int id)
{
    WorldState w = world;
    std::erase_if(w.agents, [id](const AgentState& a) { return a.id == id; });
    if (w.ego.id == id) {
        // Park the ego far away so it never interacts.
        w.ego.pose = Pose2D(1e12, 1e12, 0.0);
    }
    return w;
}

struct Follower
{
    const AgentState* agent = nullptr;
    Leader link;
};

std::optional<Follower> find_follower(const AgentState& target, const WorldState& world, const LaneGraph& graph)
{
    std::optional<Follower> best;
    for_each_other(world, target.id, [&](const AgentState& other) {
        if (other.kind == AgentKind::static_object) return;
        auto leader = select_leader(other, world, graph);
        if (leader && leader->id == target.id && (!best || leader->gap < best->link.gap))
            best = Follower{&other, *leader};
    });
    return best;
}

} // namespace

std::optional<Leader> select_leader(const AgentState& agent, const WorldState& world, const LaneGraph& graph,
                                    std::optional<int> lane_hint)
{
    const auto pos = graph.locate(agent.pose, lane_hint);
    if (!pos) return std::nullopt;
    const auto walk = lane_walk(*pos, graph);
    std::optional<Leader> best;
    double best_dist = kFreeRoad;
    for_each_other(world, agent.id, [&](const AgentState& other) {
        for (const WalkItem& item : walk) {
            const Lane& lane = graph.lane(item.lane_id);
            if (!point_in_polygon(other.pose.position(), lane.polygon())) continue;
            const PolylineProjection proj = lane.centerline().project(other.pose.position());
            const double dist = item.offset + proj.arc_length;
            if (dist <= 0.0 || dist > kLeaderLookahead || dist >= best_dist) continue;
            best_dist = dist;
            const double along = other.speed * std::cos(other.pose.heading() - proj.tangent_heading);
            best = Leader{other.id, dist - 0.5 * (agent.length + other.length), agent.speed - along};
        }
    });
    return best;
}

LaneChange mobil_decide(const AgentState& agent, const WorldState& world, const LaneGraph& graph,
                        const MobilParams& mp, const IdmParams& ip, std::optional<int> lane_hint)
{
    const auto pos = graph.locate(agent.pose, lane_hint);
    if (!pos) return LaneChange::keep;
    const Lane& lane = graph.lane(pos->lane_id);

    const double self_before = accel_with(agent, select_leader(agent, world, graph, pos->lane_id), ip);
    const WorldState without = remove_agent(world, agent.id);

    double old_follower_gain = 0.0;
    if (auto f = find_follower(agent, world, graph)) {
        const double before = accel_with(*f->agent, f->link, ip);
        const double after = accel_with(*f->agent, select_leader(*f->agent, without, graph), ip);
        old_follower_gain = after - before;
    }

    auto evaluate = [&](std::optional<int> neighbor) -> std::optional<double> {
        if (!neighbor) return std::nullopt;
        const Lane& target = graph.lane(*neighbor);
        const PolylineProjection proj = target.centerline().project(agent.pose.position());
        AgentState moved = agent;
        moved.pose = Pose2D(proj.point, proj.tangent_heading);
        const WorldState hypothetical = replace_agent(world, moved);
        const double self_after = accel_with(moved, select_leader(moved, hypothetical, graph, *neighbor), ip);

        double new_follower_gain = 0.0;
        if (auto nf = find_follower(moved, hypothetical, graph)) {
            const double after = accel_with(*nf->agent, nf->link, ip);
            if (after < -mp.b_safe) return std::nullopt;
            const double before = accel_with(*nf->agent, select_leader(*nf->agent, without, graph), ip);
            new_follower_gain = after - before;
        }
        const double incentive =
            self_after - self_before + mp.politeness * (new_follower_gain + old_follower_gain);
        if (incentive > mp.threshold) return incentive;
        return std::nullopt;
    };

    const auto left = evaluate(lane.left_neighbor());
    const auto right = evaluate(lane.right_neighbor());
    if (left && right) {
        if (*left == *right) return LaneChange::keep;
        return *left > *right ? LaneChange::change_left : LaneChange::change_right;
    }
    if (left) return LaneChange::change_left;
    if (right) return LaneChange::change_right;
    return LaneChange::keep;
}

IdmStepResult idm_agent_step(const AgentState& agent, const WorldState& world, const LaneGraph& graph,
                             const IdmParams& p, double dt, std::optional<int> lane_hint,
                             const IdmStepOptions& options)
{
    if (agent.kind == AgentKind::static_object) return {agent, std::nullopt};

    std::optional<LanePosition> pos;
    if (options.force_lane && lane_hint && graph.has_lane(*lane_hint)) {
        const CenterlineProjection proj = project_to_centerline(agent.pose, graph.lane(*lane_hint));
        pos = LanePosition{*lane_hint, proj.arc_length, proj.lateral_offset, proj.heading_error};
    } else {
        pos = graph.locate(agent.pose, lane_hint);
    }
    if (!pos) {
        AgentState next = agent;
        const Vec2 step = agent.velocity() * dt;
        next.pose = Pose2D(agent.pose.position() + step, agent.pose.heading());
        next.acceleration = 0.0;
        return {next, std::nullopt};
    }

    const Lane* lane = &graph.lane(pos->lane_id);
    IdmParams params = p;
    if (options.use_lane_speed_limit) params.v0 = lane->speed_limit();

    const double accel = accel_with(agent, select_leader(agent, world, graph, pos->lane_id), params);
    const double speed = std::max(0.0, agent.speed + accel * dt);

    double s = pos->arc_length + speed * dt;
    while (s > lane->length() && !lane->successors().empty()) {
        s -= lane->length();
        lane = &graph.lane(lane->successors().front());
    }
    double lateral = pos->lateral_offset;
    if (options.lateral_relax_speed > 0.0) {
        const double max_step = options.lateral_relax_speed * dt;
        lateral -= std::clamp(lateral, -max_step, max_step);
    }

    AgentState next = agent;
    const Polyline& line = lane->centerline();
    next.pose = Pose2D(line.point_at(s) + line.normal_at(s) * lateral, line.heading_at(s));
    next.speed = speed;
    next.acceleration = (speed - agent.speed) / dt;
    return {next, lane->id()};
}

} // namespace cloop
