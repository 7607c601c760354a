#include "cloop/background.hpp"

#include "cloop/error.hpp"

#include <algorithm>
#include <cmath>

namespace cloop {

std::string to_string(BackgroundKind k)
{
    switch (k) {
    case BackgroundKind::non_reactive_replay: return "non_reactive_replay";
    case BackgroundKind::idm_reactive: return "idm_reactive";
    case BackgroundKind::learned_reactive: return "learned_reactive";
    }
    return "unknown";
}

BackgroundKind background_from_string(const std::string& s)
{
    if (s == "non_reactive_replay" || s == "replay" || s == "nr") return BackgroundKind::non_reactive_replay;
    if (s == "idm_reactive" || s == "idm" || s == "r") return BackgroundKind::idm_reactive;
    if (s == "learned_reactive" || s == "learned" || s == "sr") return BackgroundKind::learned_reactive;
    throw Error("unknown background kind '" + s + "'");
}

std::string score_label(BackgroundKind k)
{
    switch (k) {
    case BackgroundKind::non_reactive_replay: return "CLS-NR";
    case BackgroundKind::idm_reactive: return "CLS-R";
    case BackgroundKind::learned_reactive: return "CLS-SR";
    }
    return "CLS-?";
}

void ReplayBackground::reset(const Scenario& scn, std::uint64_t)
{
    for (const auto& a : scn.agents) {
        const Trajectory* log = scn.logged(a.id);
        if (!log || static_cast<int>(log->size()) < scn.horizon_steps + 1)
            throw Error("replay background: agent " + std::to_string(a.id) + " of scenario " + scn.id +
                        " has no logged future covering the horizon");
    }
}

std::vector<AgentState> ReplayBackground::step(const WorldState& world, const Scenario& scn)
{
    std::vector<AgentState> next = world.agents;
    const std::size_t k = static_cast<std::size_t>(world.step_index) + 1;
    for (auto& a : next) {
        const Trajectory& log = *scn.logged(a.id);
        const TrajectorySample& s = log[std::min(k, log.size() - 1)];
        a.acceleration = (s.speed - a.speed) / scn.dt;
        a.pose = s.pose;
        a.speed = s.speed;
    }
    return next;
}

void IdmBackground::reset(const Scenario& scn, std::uint64_t)
{
    config_.params.validate();
    config_.mobil.validate();
    lane_of_.clear();
    changing_.clear();
    for (const auto& a : scn.agents)
        if (auto pos = scn.lane_graph->locate(a.pose)) lane_of_[a.id] = pos->lane_id;
}

std::vector<AgentState> IdmBackground::step(const WorldState& world, const Scenario& scn)
{
    const LaneGraph& graph = *scn.lane_graph;
    std::vector<AgentState> next;
    next.reserve(world.agents.size());
    for (const auto& a : world.agents) {
        std::optional<int> hint;
        if (auto it = lane_of_.find(a.id); it != lane_of_.end()) hint = it->second;

        IdmStepOptions options;
        options.use_lane_speed_limit = config_.use_lane_speed_limit;
        const bool changing = changing_.count(a.id) != 0;
        if (config_.enable_mobil) {
            options.lateral_relax_speed = config_.lane_change_lateral_speed;
            if (!changing && a.kind == AgentKind::vehicle) {
                IdmParams ip = config_.params;
                if (config_.use_lane_speed_limit && hint) ip.v0 = graph.lane(*hint).speed_limit();
                const LaneChange decision = mobil_decide(a, world, graph, config_.mobil, ip, hint);
                if (decision != LaneChange::keep && hint) {
                    const Lane& lane = graph.lane(*hint);
                    hint = decision == LaneChange::change_left ? lane.left_neighbor() : lane.right_neighbor();
                    changing_.insert(a.id);
                }
            }
            options.force_lane = changing_.count(a.id) != 0;
        }

        IdmStepResult r = idm_agent_step(a, world, graph, config_.params, scn.dt, hint, options);
        if (r.lane_id) {
            lane_of_[a.id] = *r.lane_id;
        } else {
            lane_of_.erase(a.id);
            changing_.erase(a.id);
        }
        if (changing_.count(a.id) && r.lane_id) {
            const auto pos = graph.locate(r.state.pose, *r.lane_id);
            if (pos && pos->lane_id == *r.lane_id && std::abs(pos->lateral_offset) < 0.05) changing_.erase(a.id);
        }
        next.push_back(r.state);
    }
    return next;
}

LearnedBackground::LearnedBackground(std::shared_ptr<const TokenPolicyModel> model,
                                     std::shared_ptr<const TokenVocabulary> vocab, DecodeOptions options)
    : model_(std::move(model)), vocab_(std::move(vocab)), options_(options)
{
    if (!model_ || !vocab_) throw Error("learned background requires a loaded token policy and vocabulary");
    if (model_->vocab_hash != vocab_->hash() || model_->vocab_size != vocab_->size())
        throw Error("learned background: model and vocabulary do not match");
}

void LearnedBackground::reset(const Scenario&, std::uint64_t seed)
{
    rng_.seed(seed);
    cache_.clear();
    decode_counts_.clear();
}

std::vector<AgentState> LearnedBackground::step(const WorldState& world, const Scenario& scn)
{
    std::vector<AgentState> next = world.agents;
    const int phase = world.step_index % kStepsPerToken;
    for (auto& a : next) {
        if (a.kind == AgentKind::static_object) continue;
        auto it = cache_.find(a.id);
        if (phase == 0 || it == cache_.end()) {
            const MotionToken token =
                decode_step(world, a.id, *model_, *vocab_, *scn.lane_graph, options_, options_.sample ? &rng_ : nullptr);
            ++decode_counts_[a.id];
            it = cache_.insert_or_assign(a.id, upsample_tokens(a.pose, token)).first;
        }
        const Pose2D& target = it->second[static_cast<std::size_t>(phase)];
        const double speed = distance(target.position(), a.pose.position()) / scn.dt;
        a.acceleration = (speed - a.speed) / scn.dt;
        a.pose = target;
        a.speed = speed;
    }
    return next;
}

std::unique_ptr<Background> make_background(BackgroundKind kind, const BackgroundResources& resources)
{
    switch (kind) {
    case BackgroundKind::non_reactive_replay: return std::make_unique<ReplayBackground>();
    case BackgroundKind::idm_reactive: return std::make_unique<IdmBackground>(resources.idm);
    case BackgroundKind::learned_reactive:
        return std::make_unique<LearnedBackground>(resources.model, resources.vocab, resources.decode);
    }
    throw Error("unknown background kind");
}

} // namespace cloop
