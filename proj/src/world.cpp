#include "cloop/world.hpp"

namespace cloop {

namespace {

const AgentState* find_in(const AgentState& ego, const std::vector<AgentState>& agents, int id)
{
    if (ego.id == id) return &ego;
    for (const auto& a : agents)
        if (a.id == id) return &a;
    return nullptr;
}

} // namespace

const AgentState* WorldState::find(int id) const
{
    return find_in(ego, agents, id);
}

const AgentState* WorldState::past(int id, std::size_t steps_back) const
{
    if (steps_back == 0 || history.empty()) return find(id);
    const std::size_t available = history.size();
    const std::size_t back = std::min(steps_back, available);
    const WorldSnapshot& snap = history[available - back];
    const AgentState* s = find_in(snap.ego, snap.agents, id);
    return s ? s : find(id);
}

void WorldState::push_history()
{
    history.push_back(snapshot());
    while (history.size() > kHistoryLength) history.pop_front();
}

WorldState initial_world(const Scenario& s)
{
    WorldState w;
    w.step_index = 0;
    w.sim_time = 0.0;
    w.ego = s.ego;
    w.agents = s.agents;
    return w;
}

} // namespace cloop
