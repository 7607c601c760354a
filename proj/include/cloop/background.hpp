#pragma once

#include "cloop/idm.hpp"
#include "cloop/policy.hpp"
#include "cloop/scenario.hpp"
#include "cloop/world.hpp"

#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace cloop {

enum class BackgroundKind { non_reactive_replay, idm_reactive, learned_reactive };

std::string to_string(BackgroundKind k);
BackgroundKind background_from_string(const std::string& s);
/// "CLS-NR", "CLS-R" or "CLS-SR".
std::string score_label(BackgroundKind k);

/// Policy for all non-ego agents. `step` receives the world at tick t and
/// returns every background agent's state at t+1, in world.agents order.
class Background
{
public:
    virtual ~Background() = default;
    virtual BackgroundKind kind() const = 0;
    virtual void reset(const Scenario& scn, std::uint64_t seed) = 0;
    virtual std::vector<AgentState> step(const WorldState& world, const Scenario& scn) = 0;
};

class ReplayBackground final : public Background
{
public:
    BackgroundKind kind() const override { return BackgroundKind::non_reactive_replay; }
    void reset(const Scenario& scn, std::uint64_t seed) override;
    std::vector<AgentState> step(const WorldState& world, const Scenario& scn) override;
};

struct IdmBackgroundConfig
{
    IdmParams params;
    bool use_lane_speed_limit = true;
    bool enable_mobil = false;
    MobilParams mobil;
    double lane_change_lateral_speed = 1.0; // m/s, only used with MOBIL
};

class IdmBackground final : public Background
{
public:
    explicit IdmBackground(IdmBackgroundConfig config = {}) : config_(config) {}
    BackgroundKind kind() const override { return BackgroundKind::idm_reactive; }
    void reset(const Scenario& scn, std::uint64_t seed) override;
    std::vector<AgentState> step(const WorldState& world, const Scenario& scn) override;

private:
    IdmBackgroundConfig config_;
    std::map<int, int> lane_of_; // agent id -> last known lane
    std::set<int> changing_;     // agents executing a MOBIL lane change
};

/// Receding-horizon token agents: every 0.5 s each agent decodes one token
/// from the current scene, which is upsampled to five 0.1 s poses and
/// executed over the next five ticks.
class LearnedBackground final : public Background
{
public:
    LearnedBackground(std::shared_ptr<const TokenPolicyModel> model, std::shared_ptr<const TokenVocabulary> vocab,
                      DecodeOptions options = {});
    BackgroundKind kind() const override { return BackgroundKind::learned_reactive; }
    void reset(const Scenario& scn, std::uint64_t seed) override;
    std::vector<AgentState> step(const WorldState& world, const Scenario& scn) override;

    /// Number of decode calls per agent since the last reset.
    const std::map<int, int>& decode_counts() const { return decode_counts_; }

private:
    std::shared_ptr<const TokenPolicyModel> model_;
    std::shared_ptr<const TokenVocabulary> vocab_;
    DecodeOptions options_;
    std::mt19937_64 rng_;
    std::map<int, std::array<Pose2D, kStepsPerToken>> cache_;
    std::map<int, int> decode_counts_;
};

struct BackgroundResources
{
    IdmBackgroundConfig idm;
    std::shared_ptr<const TokenPolicyModel> model;
    std::shared_ptr<const TokenVocabulary> vocab;
    DecodeOptions decode;
};

std::unique_ptr<Background> make_background(BackgroundKind kind, const BackgroundResources& resources);

} // namespace cloop
