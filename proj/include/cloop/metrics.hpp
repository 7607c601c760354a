#pragma once

#include "cloop/engine.hpp"
#include "cloop/lane_graph.hpp"
#include "cloop/scenario.hpp"

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cloop {

struct MetricWeights
{
    double ttc = 5.0;
    double progress = 5.0;
    double speed_limit = 4.0;
    double comfort = 2.0;

    void validate() const;
};

struct ComfortThresholds
{
    double min_lon_accel = -4.05; // m/s^2
    double max_lon_accel = 2.40;  // m/s^2
    double max_lat_accel = 4.89;  // m/s^2
    double max_jerk = 8.37;       // m/s^3
    double max_yaw_rate = 0.95;   // rad/s
};

struct MetricConfig
{
    MetricWeights weights;
    ComfortThresholds comfort;
    double ttc_threshold = 0.95; // s
    double ttc_horizon = 3.0;    // s
    double ttc_step = 0.1;       // s
    double max_offroad_distance = 0.5; // m, any single step
    double max_offroad_time = 0.3;     // s, cumulative
    double at_fault_min_speed = 0.1;   // m/s
};

struct SoftMetrics
{
    double ttc = 1.0;
    double progress = 1.0;
    double comfort = 1.0;
    double speed_limit = 1.0;
};

struct HardMultipliers
{
    bool at_fault_collision = false;
    bool drivable_area_violation = false;
};

struct ClosedLoopScore
{
    SoftMetrics soft;
    HardMultipliers hard;
    double composite = 0.0;
    BackgroundKind background = BackgroundKind::non_reactive_replay;
};

/// 0 if any hard flag fires, else 100 * sum(w_i s_i) / sum(w_i).
ClosedLoopScore compose_cls(const SoftMetrics& soft, const HardMultipliers& hard, const MetricWeights& weights);

struct CollisionEvent
{
    int step = 0;
    int other_id = 0;
    Vec2 contact_centroid; // ego frame
};

/// First contact between the ego footprint and each agent; one event per agent.
std::vector<CollisionEvent> detect_collisions(const RolloutLog& log);

/// At fault iff (contact in the ego's front half and ego speed >= 0.1 m/s) or
/// the ego center lies outside its route-lane corridor at contact.
bool classify_at_fault(const CollisionEvent& event, const RolloutLog& log, const Route& route,
                       const LaneGraph& graph, const MetricConfig& cfg = {});

/// Violation flag: a footprint vertex more than 0.5 m outside the drivable
/// union at any step, or outside at all for more than 0.3 s in total.
bool drivable_area_compliance(const RolloutLog& log, const LaneGraph& graph, const MetricConfig& cfg = {});

struct TtcResult
{
    double score = 1.0;
    double min_ttc = std::numeric_limits<double>::infinity();
    int min_step = -1;
};

TtcResult time_to_collision_score(const RolloutLog& log, const MetricConfig& cfg = {});

constexpr double kMinReferenceProgress = 1.0; // m

/// Furthest arc length reached along the route path, relative to the start.
double ego_progress(const RolloutLog& log, const Route& route);
/// clamp(progress / reference, 0, 1); 1 when the reference is below 1 m.
double progress_score(const RolloutLog& log, const Route& route, double reference_progress);
/// Expert progress from the logged ego future, else the achievable distance.
double reference_progress(const Scenario& scn);

struct ComfortResult
{
    double score = 1.0;
    double min_lon_accel = 0.0;
    double max_lon_accel = 0.0;
    double max_abs_lat_accel = 0.0;
    double max_jerk = 0.0;
    double max_abs_yaw_rate = 0.0;
};

ComfortResult comfort_score(const RolloutLog& log, const ComfortThresholds& thresholds = {});

double speed_limit_score(const RolloutLog& log, const LaneGraph& graph);

/// Mean positional error over samples 1..horizon_steps, averaged over agents.
double ade(std::span<const std::vector<Vec2>> simulated, std::span<const std::vector<Vec2>> logged,
           int horizon_steps);

struct RealismReport
{
    double ade = 0.0;
    double kinematic = 1.0;
    double interaction = 1.0;
    double map = 1.0;
    double composite = 1.0;
};

constexpr int kHistogramBins = 16;
constexpr int kAdeHorizonSteps = 80;

/// Jensen-Shannon divergence (base 2) between two histograms of counts.
double js_divergence(std::span<const double> p, std::span<const double> q);
std::vector<double> histogram(std::span<const double> values, double lo, double hi, int bins = kHistogramBins);

/// Background-agent realism against the logged futures. Throws when any
/// agent lacks a logged future.
RealismReport realism_report(const RolloutLog& log, const Scenario& scn);

struct ScenarioEvaluation
{
    std::string scenario_id;
    std::string tag;
    std::string planner;
    BackgroundKind background = BackgroundKind::non_reactive_replay;
    Termination termination = Termination::completed;
    std::string error;
    ClosedLoopScore score;
    double min_ttc = std::numeric_limits<double>::infinity();
    double progress_m = 0.0;
    double reference_progress_m = 0.0;
    int collisions = 0;
    std::optional<RealismReport> realism;
};

/// All planner metrics for one rollout; planner errors score 0.
ScenarioEvaluation evaluate_rollout(const RolloutLog& log, const Scenario& scn, const MetricConfig& cfg = {});

struct GroupScore
{
    double mean = 0.0;
    int count = 0;
};

struct BenchmarkReport
{
    std::vector<ScenarioEvaluation> records; // sorted by (scenario, planner, background)
    std::map<std::string, std::map<BackgroundKind, GroupScore>> by_planner;
    std::map<std::string, std::map<std::string, std::map<BackgroundKind, GroupScore>>> by_planner_tag;
    int planner_errors = 0;
    int internal_errors = 0; // excluded from the means
};

BenchmarkReport aggregate_benchmark(std::vector<ScenarioEvaluation> records);

/// Mean(b) - mean(a) for a planner (optionally restricted to a tag).
std::optional<double> score_delta(const BenchmarkReport& report, const std::string& planner, BackgroundKind a,
                                  BackgroundKind b, const std::string& tag = "");

} // namespace cloop
