#include "support.hpp"

#include "cloop/error.hpp"
#include "cloop/idm.hpp"

#include <doctest.h>

#include <random>

using namespace cloop;
using namespace testing_support;

namespace {

double scalar_idm(double v, double gap, double dv, const IdmParams& p)
{
    double s_star = v * p.time_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b));
    s_star = p.min_gap + (s_star > 0 ? s_star : 0);
    const double inter = std::isinf(gap) ? 0.0 : (s_star / gap) * (s_star / gap);
    const double a = p.a_max * (1.0 - std::pow(v / p.v0, p.delta) - inter);
    return a < -10.0 ? -10.0 : a;
}

WorldState world_of(const AgentState& ego, std::vector<AgentState> agents)
{
    WorldState w;
    w.ego = ego;
    w.agents = std::move(agents);
    return w;
}

} // namespace

TEST_CASE("idm_acceleration worked values")
{
    IdmParams p;
    CHECK(idm_acceleration(15.0, kFreeRoad, 0.0, p) == doctest::Approx(0.0));
    CHECK(idm_acceleration(0.0, kFreeRoad, 0.0, p) == doctest::Approx(1.5));
    CHECK(idm_acceleration(10.0, kFreeRoad, 0.0, p) == doctest::Approx(1.5 * (1.0 - std::pow(10.0 / 15.0, 4))));
    CHECK(idm_acceleration(10.0, kFreeRoad, 0.0, p) == doctest::Approx(1.2037).epsilon(1e-4));
    CHECK(idm_acceleration(0.0, p.min_gap, 0.0, p) == doctest::Approx(0.0));
    CHECK(idm_acceleration(1.0, p.min_gap, 1.0, p) < 0.0);
    CHECK(idm_acceleration(30.0, 0.5, 20.0, p) == -10.0);
}

TEST_CASE("idm_acceleration rejects overlapping leaders")
{
    CHECK_THROWS_WITH_AS(idm_acceleration(5.0, 0.0, 0.0, IdmParams{}), "overlapping leader", Error);
    CHECK_THROWS_AS(idm_acceleration(5.0, -1.0, 0.0, IdmParams{}), Error);
}

TEST_CASE("idm_acceleration matches a scalar evaluation and is monotone")
{
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        IdmParams p;
        p.v0 = 2 + 30 * u(rng);
        p.time_headway = 0.5 + 2 * u(rng);
        p.min_gap = 1 + 3 * u(rng);
        p.a_max = 0.5 + 2 * u(rng);
        p.b = 1 + 3 * u(rng);
        const double v = 30 * u(rng), gap = 0.5 + 100 * u(rng), dv = -10 + 20 * u(rng);
        const double a = idm_acceleration(v, gap, dv, p);
        CHECK(a == doctest::Approx(scalar_idm(v, gap, dv, p)).epsilon(1e-12));
        CHECK(idm_acceleration(v, gap, dv + 0.5, p) <= a);
        CHECK(idm_acceleration(v, gap + 0.5, dv, p) >= a);
    }
}

TEST_CASE("parameter validation")
{
    IdmParams p;
    p.b = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    IdmParams q;
    q.delta = 0.5;
    CHECK_THROWS_AS(q.validate(), Error);
    MobilParams m;
    m.b_safe = 0.0;
    CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("select_leader gap arithmetic and free road")
{
    const auto g = road(true);
    const AgentState me = [] {
        auto a = vehicle(1, 50, 0, 10);
        a.length = 4.0;
        return a;
    }();
    CHECK_FALSE(select_leader(me, world_of(vehicle(kEgoId, 300, 3.5, 0), {me}), *g));
    auto lead = vehicle(2, 70, 0, 8);
    lead.length = 4.0;
    const auto l = select_leader(me, world_of(vehicle(kEgoId, 300, 3.5, 0), {me, lead}), *g);
    REQUIRE(l);
    CHECK(l->id == 2);
    CHECK(l->gap == doctest::Approx(16.0));
    CHECK(l->closing_speed == doctest::Approx(2.0));
}

TEST_CASE("select_leader ignores vehicles in the neighbour lane")
{
    const auto g = road(true);
    const auto me = vehicle(1, 50, 0, 10);
    // Mid-merge: 2 m ahead, still outside lane 1's polygon at its center.
    auto merging = vehicle(kEgoId, 56.5, 2.0, 10, -0.2);
    CHECK_FALSE(select_leader(me, world_of(merging, {me}), *g));

    // Perturbing neighbour-lane vehicles never changes the answer.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto lead = vehicle(2, 80, 0, 7);
    const auto base = select_leader(me, world_of(vehicle(kEgoId, 300, 3.5, 0), {me, lead}), *g);
    for (int i = 0; i < 200; ++i) {
        auto other = vehicle(3, 40 + 60 * u(rng), 3.5 + 0.3 * (u(rng) - 0.5), 20 * u(rng));
        const auto l = select_leader(me, world_of(vehicle(kEgoId, 300, 3.5, 0), {me, lead, other}), *g);
        REQUIRE(l);
        CHECK(l->id == base->id);
        CHECK(l->gap == base->gap);
    }
}

TEST_CASE("select_leader follows successor lanes within the lookahead")
{
    auto a = straight_lane(1, 0.0, 100);
    a.successors = {2};
    auto b = straight_lane(2, 0.0, 200);
    b.centerline = {{100, 0}, {300, 0}};
    const LaneGraph g({a, b});
    const auto me = vehicle(1, 90, 0, 10);
    const auto lead = vehicle(2, 150, 0, 10);
    WorldState w = world_of(vehicle(kEgoId, 0, 50, 0), {me, lead});
    const auto l = select_leader(me, w, g);
    REQUIRE(l);
    CHECK(l->gap == doctest::Approx(55.5));
    w.agents[1].pose.x = 250; // beyond 100 m
    CHECK_FALSE(select_leader(me, w, g));
}

TEST_CASE("mobil decisions")
{
    const IdmParams ip;
    MobilParams mp;
    mp.politeness = 0.0;
    mp.threshold = 0.1;
    const auto me = vehicle(1, 50, 0, 10);
    const auto slow = vehicle(2, 62, 0, 3);
    // One lane: keep.
    CHECK(mobil_decide(me, world_of(vehicle(kEgoId, 400, 0, 0), {me, slow}), *road(false), mp, ip) ==
          LaneChange::keep);
    // Blocked by a slow leader, empty left lane.
    const auto g = road(true);
    const auto w = world_of(vehicle(kEgoId, 400, 3.5, 0), {me, slow});
    const double stay = idm_acceleration(10, 12 - 4.5, 7, ip);
    const double go = idm_acceleration(10, kFreeRoad, 0, ip);
    REQUIRE(go - stay > mp.threshold);
    CHECK(mobil_decide(me, w, *g, mp, ip) == LaneChange::change_left);
    // Free road in both lanes: identical gain, keep.
    CHECK(mobil_decide(me, world_of(vehicle(kEgoId, 400, 3.5, 0), {me}), *g, mp, ip) == LaneChange::keep);
    // Unsafe: a fast follower right behind in the target lane.
    const auto follower = vehicle(3, 46, 3.5, 20);
    CHECK(mobil_decide(me, world_of(vehicle(kEgoId, 400, 3.5, 0), {me, slow, follower}), *g, mp, ip) ==
          LaneChange::keep);
}

TEST_CASE("idm_agent_step advances along the centerline")
{
    const auto g = road(false);
    IdmParams p;
    const auto me = vehicle(1, 10, 0.4, 15);
    const auto r = idm_agent_step(me, world_of(vehicle(kEgoId, 400, 0, 0), {me}), *g, p, 0.1);
    CHECK(r.state.speed == doctest::Approx(15.0));
    CHECK(r.state.pose.x == doctest::Approx(11.5));
    CHECK(r.state.pose.heading() == doctest::Approx(0.0));
    REQUIRE(r.lane_id);
    CHECK(*r.lane_id == 1);

    const auto stopped = vehicle(2, 10 + 4.5 + p.min_gap, 0, 0);
    const auto slowing = idm_agent_step(vehicle(1, 10, 0, 5), world_of(vehicle(kEgoId, 400, 0, 0), {vehicle(1, 10, 0, 5), stopped}), *g, p, 0.1);
    CHECK(slowing.state.speed < 5.0);
}

TEST_CASE("idm_agent_step continues onto the successor lane")
{
    auto a = straight_lane(1, 0.0, 100);
    a.successors = {2};
    auto b = straight_lane(2, 0.0);
    b.centerline = {{100, 0}, {100, 200}}; // turns left at the junction
    const LaneGraph g({a, b});
    AgentState me = vehicle(1, 99.5, 0, 10);
    std::optional<int> lane = 1;
    for (int k = 0; k < 20; ++k) {
        const auto r = idm_agent_step(me, world_of(vehicle(kEgoId, 0, 50, 0), {me}), g, IdmParams{}, 0.1, lane);
        me = r.state;
        lane = r.lane_id;
    }
    REQUIRE(lane);
    CHECK(*lane == 2);
    CHECK(me.pose.x == doctest::Approx(100.0).epsilon(1e-6));
    CHECK(me.pose.heading() == doctest::Approx(std::numbers::pi / 2));
}
