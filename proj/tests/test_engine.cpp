#include "support.hpp"

#include "cloop/background.hpp"
#include "cloop/engine.hpp"
#include "cloop/error.hpp"
#include "cloop/planners.hpp"

#include <doctest.h>

using namespace cloop;
using namespace testing_support;

namespace {

PlannedTrajectory line_plan(const AgentState& from, double v, int n = 10)
{
    PlannedTrajectory p;
    for (int k = 0; k <= n; ++k)
        p.push_back({k * 0.1, Pose2D(from.pose.x + v * 0.1 * k, from.pose.y, 0), v});
    return p;
}

class ThrowingPlanner final : public Planner
{
public:
    explicit ThrowingPlanner(int fail_at) : fail_at_(fail_at) {}
    std::string name() const override { return "throwing"; }
    PlannedTrajectory plan(const PlannerObservation& obs) override
    {
        if (obs.world.step_index == fail_at_) throw std::runtime_error("boom");
        PlannedTrajectory p = line_plan(obs.world.ego, 5.0);
        for (auto& s : p) s.t += obs.sim_time;
        return p;
    }

private:
    int fail_at_;
};

class NegativeSpeedPlanner final : public Planner
{
public:
    std::string name() const override { return "negative"; }
    PlannedTrajectory plan(const PlannerObservation& obs) override
    {
        PlannedTrajectory p = line_plan(obs.world.ego, 5.0);
        for (auto& s : p) s.t += obs.sim_time;
        p[3].speed = -1.0;
        return p;
    }
};

} // namespace

TEST_CASE("validate_planned")
{
    const auto ok = line_plan(vehicle(0, 0, 0, 5), 5.0);
    CHECK_NOTHROW(validate_planned(ok, 0.0, 0.1));
    CHECK_THROWS_WITH(validate_planned(PlannedTrajectory(ok.begin(), ok.begin() + 5), 0.0, 0.1),
                      doctest::Contains("shorter"));
    CHECK_THROWS_WITH(validate_planned(ok, 0.3, 0.1), doctest::Contains("sim time"));
    auto bad = ok;
    bad[4].pose.x = std::nan("");
    CHECK_THROWS_WITH(validate_planned(bad, 0.0, 0.1), doctest::Contains("sample 4"));
    bad = ok;
    bad[6].t += 0.05;
    CHECK_THROWS_WITH(validate_planned(bad, 0.0, 0.1), doctest::Contains("spaced"));
}

TEST_CASE("perfect tracker lands on the next sample")
{
    const auto ego = vehicle(kEgoId, 0, 0, 5);
    auto plan = line_plan(ego, 6.0);
    plan[1].pose = Pose2D(0.7, 0.1, 0.05);
    const auto next = track(ego, plan, TrackerMode::perfect, 0.1);
    CHECK(next.pose == plan[1].pose);
    CHECK(next.speed == 6.0);
    CHECK(next.acceleration == doctest::Approx(10.0));
}

TEST_CASE("kinematic tracker follows the pure-pursuit arc")
{
    const auto ego = vehicle(kEgoId, 0, 0, 10);
    PlannedTrajectory plan{{0.0, Pose2D(0, 0, 0), 10.0}, {0.1, Pose2D(10, 2, 0), 10.0}};
    const auto next = track(ego, plan, TrackerMode::kinematic, 0.1);
    // Target 10.2 m away at (10, 2): kappa = 2y / L^2.
    const double kappa = 2.0 * 2.0 / 104.0;
    const double s = 1.0;
    CHECK(next.speed == doctest::Approx(10.0));
    CHECK(next.pose.heading() == doctest::Approx(kappa * s).epsilon(1e-9));
    CHECK(next.pose.x == doctest::Approx(std::sin(kappa * s) / kappa).epsilon(1e-3));
    CHECK(std::abs(next.pose.y - (1.0 - std::cos(kappa * s)) / kappa) < 5e-3);

    // Curvature and acceleration saturate.
    PlannedTrajectory sharp{{0.0, Pose2D(0, 0, 0), 20.0}, {0.1, Pose2D(0, 5, 0), 20.0}};
    const auto turned = track(ego, sharp, TrackerMode::kinematic, 0.1);
    CHECK(turned.speed == doctest::Approx(10.3));
    CHECK(turned.pose.heading() == doctest::Approx(0.2 * 0.1 * 10.15).epsilon(1e-9));
}

TEST_CASE("history keeps one second and pads with the oldest state")
{
    const auto g = road();
    const Scenario scn = scenario(g, vehicle(kEgoId, 0, 0, 10), {vehicle(1, 30, 0, 8)}, 30);
    WorldState w = initial_world(scn);
    CHECK(w.history.empty());
    CHECK(w.past(1, 3)->pose.x == 30.0);
    ReplayBackground bg;
    bg.reset(scn, 0);
    for (int k = 0; k < 15; ++k) {
        auto plan = line_plan(w.ego, 10.0);
        for (auto& s : plan) s.t += w.sim_time;
        w = step(w, plan, bg, scn, TrackerMode::perfect);
    }
    CHECK(w.step_index == 15);
    CHECK(w.history.size() == WorldState::kHistoryLength);
    CHECK(w.past(1, 1)->pose.x == doctest::Approx(30 + 8 * 1.4));
    CHECK(w.past(1, 10)->pose.x == doctest::Approx(30 + 8 * 0.5));
    CHECK(w.past(1, 25)->pose.x == w.past(1, 10)->pose.x);
    CHECK(w.past(kEgoId, 0)->pose.x == doctest::Approx(15.0));
    CHECK(w.past(77, 1) == nullptr);
}

TEST_CASE("rollout with replay background reproduces the logs")
{
    const auto g = road(true);
    const Scenario scn =
        scenario(g, vehicle(kEgoId, 0, 0, 10), {vehicle(1, 30, 0, 8), vehicle(2, 10, 3.5, 12)}, 40);
    LogReplayPlanner planner;
    ReplayBackground bg;
    const auto log = run_scenario(scn, planner, bg, TrackerMode::perfect, 3);
    CHECK(log.termination == Termination::completed);
    REQUIRE(log.snapshots.size() == 41);
    for (int k = 0; k <= 40; ++k) {
        CHECK(log.snapshots[k].ego.pose == scn.logged_futures.at(kEgoId)[k].pose);
        CHECK(log.snapshots[k].agents[0].pose == scn.logged_futures.at(1)[k].pose);
        CHECK(log.snapshots[k].agents[1].pose == scn.logged_futures.at(2)[k].pose);
    }
    CHECK(log.planner_latency_ms.size() == 40);
}

TEST_CASE("planner failures truncate the rollout")
{
    const auto g = road();
    const Scenario scn = scenario(g, vehicle(kEgoId, 0, 0, 5), {vehicle(1, 60, 0, 5)}, 40);
    ReplayBackground bg;
    ThrowingPlanner thrower(12);
    const auto log = run_scenario(scn, thrower, bg, TrackerMode::perfect, 0);
    CHECK(log.termination == Termination::planner_error);
    CHECK(log.snapshots.size() == 13);
    CHECK(log.error.find("boom") != std::string::npos);

    NegativeSpeedPlanner negative;
    const auto neg = run_scenario(scn, negative, bg, TrackerMode::perfect, 0);
    CHECK(neg.termination == Termination::planner_error);
    CHECK(neg.snapshots.size() == 1);
    CHECK(neg.error.find("negative speed") != std::string::npos);
}

TEST_CASE("identical inputs give identical rollouts")
{
    const auto g = road(true);
    const Scenario scn =
        scenario(g, vehicle(kEgoId, 0, 0, 10), {vehicle(1, 25, 0, 6), vehicle(2, 5, 3.5, 14)}, 60);
    IdmBackground bg;
    CenterlinePlanner p;
    const auto a = run_scenario(scn, p, bg, TrackerMode::kinematic, 9);
    const auto b = run_scenario(scn, p, bg, TrackerMode::kinematic, 9);
    CHECK(a.snapshots == b.snapshots);
}
