#include "cloop/scenario.hpp"

#include "cloop/error.hpp"

#include <set>
#include <string>

namespace cloop {

void validate_agent(const AgentState& a)
{
    const std::string who = "agent " + std::to_string(a.id);
    if (!(a.length > 0.0) || !(a.width > 0.0)) throw Error(who + ": footprint dimensions must be positive");
    if (!(a.speed >= 0.0)) throw Error(who + ": speed must be non-negative");
    if (!std::isfinite(a.pose.x) || !std::isfinite(a.pose.y) || !std::isfinite(a.pose.heading()))
        throw Error(who + ": non-finite pose");
}

const Trajectory* Scenario::logged(int agent_id) const
{
    const auto it = logged_futures.find(agent_id);
    return it == logged_futures.end() ? nullptr : &it->second;
}

void validate_scenario(const Scenario& s)
{
    if (!s.lane_graph) throw Error("scenario " + s.id + ": missing lane graph");
    if (s.horizon_steps < 1) throw Error("scenario " + s.id + ": horizon_steps must be >= 1");
    if (!(s.dt > 0.0)) throw Error("scenario " + s.id + ": dt must be positive");
    validate_agent(s.ego);
    if (s.ego.id != kEgoId) throw Error("scenario " + s.id + ": ego id must be " + std::to_string(kEgoId));
    std::set<int> ids{s.ego.id};
    for (const auto& a : s.agents) {
        validate_agent(a);
        if (!ids.insert(a.id).second) throw Error("scenario " + s.id + ": duplicate agent id " + std::to_string(a.id));
    }
    for (int lane : s.route.lane_ids())
        if (!s.lane_graph->has_lane(lane))
            throw Error("scenario " + s.id + ": route references unknown lane " + std::to_string(lane));
    for (const auto& [id, traj] : s.logged_futures) {
        if (!ids.count(id)) throw Error("scenario " + s.id + ": logged future for unknown agent " + std::to_string(id));
        if (static_cast<int>(traj.size()) < s.horizon_steps + 1)
            throw Error("scenario " + s.id + ": logged future of agent " + std::to_string(id) + " covers " +
                        std::to_string(traj.size()) + " samples, need " + std::to_string(s.horizon_steps + 1));
    }
}

} // namespace cloop
