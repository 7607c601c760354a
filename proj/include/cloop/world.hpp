#pragma once

#include "cloop/scenario.hpp"

#include <deque>
#include <vector>

namespace cloop {

struct WorldSnapshot
{
    AgentState ego;
    std::vector<AgentState> agents;
    bool operator==(const WorldSnapshot&) const = default;
};

/// Simulation state at one tick. `history` holds up to the previous ten
/// ticks (oldest first), so together with the current state it spans 1 s.
struct WorldState
{
    static constexpr std::size_t kHistoryLength = 10;

    int step_index = 0;
    double sim_time = 0.0;
    AgentState ego;
    std::vector<AgentState> agents;
    std::deque<WorldSnapshot> history;

    /// Ego or background agent with the given id, or nullptr.
    const AgentState* find(int id) const;
    /// State of `id` `steps_back` ticks ago; histories shorter than that are
    /// padded by repeating the oldest available state.
    const AgentState* past(int id, std::size_t steps_back) const;
    WorldSnapshot snapshot() const { return {ego, agents}; }
    /// Pushes the current state into history and drops entries beyond 1 s.
    void push_history();
};

WorldState initial_world(const Scenario& s);

} // namespace cloop
