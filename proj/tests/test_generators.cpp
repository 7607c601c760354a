#include "cloop/error.hpp"
#include "cloop/generators.hpp"
#include "cloop/scenario_io.hpp"

#include <doctest.h>

using namespace cloop;

namespace {

bool any_overlap(const Scenario& scn)
{
    std::vector<AgentState> all{scn.ego};
    all.insert(all.end(), scn.agents.begin(), scn.agents.end());
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (obb_overlap(all[i].footprint(), all[j].footprint())) return true;
    return false;
}

} // namespace

TEST_CASE("generation is a pure function of kind, index and seed")
{
    for (SuiteKind k : {SuiteKind::car_following, SuiteKind::lane_change, SuiteKind::merge,
                        SuiteKind::intersection_lite, SuiteKind::cut_in}) {
        const auto a = generate_suite(k, 4, 21);
        CHECK(serialize_scenario(a[3]) == serialize_scenario(generate_scenario(k, 3, 21)));
        CHECK(serialize_scenario(a[1]) != serialize_scenario(generate_scenario(k, 1, 22)));
        for (const auto& s : a) {
            CHECK_NOTHROW(validate_scenario(s));
            CHECK_FALSE(any_overlap(s));
            for (const auto& [id, t] : s.logged_futures) CHECK(t.size() == static_cast<std::size_t>(s.horizon_steps) + 1);
        }
    }
    CHECK(suite_from_string(to_string(SuiteKind::intersection_lite)) == SuiteKind::intersection_lite);
    CHECK_THROWS_AS(suite_from_string("roundabout"), Error);
}

TEST_CASE("lane-change experts end inside the route corridor")
{
    for (const auto& s : generate_suite(SuiteKind::lane_change, 10, 5)) {
        const auto& log = s.logged_futures.at(kEgoId);
        CHECK(s.route.in_corridor(log.back().pose.position(), *s.lane_graph));
        const auto start = s.lane_graph->locate(log.front().pose);
        const auto end = s.lane_graph->locate(log.back().pose);
        REQUIRE(start);
        REQUIRE(end);
        CHECK(start->lane_id != end->lane_id);
        CHECK(std::abs(end->lateral_offset) < 0.5);
    }
}

TEST_CASE("cut-in scene")
{
    const Scenario s = cut_in_scenario();
    const AgentState* f = nullptr;
    for (const auto& a : s.agents)
        if (a.id == kCutInFollowerId) f = &a;
    REQUIRE(f);
    CHECK(f->pose.x < s.ego.pose.x);
    CHECK(f->speed > s.ego.speed);
    const auto fl = s.lane_graph->locate(f->pose);
    const auto el = s.lane_graph->locate(s.logged_futures.at(kEgoId).back().pose);
    REQUIRE(fl);
    REQUIRE(el);
    CHECK(fl->lane_id == el->lane_id);
}

TEST_CASE("density augmentation bands, nesting and invariants")
{
    for (const auto& base : generate_suite(SuiteKind::lane_change, 6, 9)) {
        const Scenario low = augment_density(base, DensityLevel::low, 4);
        const Scenario mid = augment_density(base, DensityLevel::mid, 4);
        const Scenario high = augment_density(base, DensityLevel::high, 4);
        for (const auto& [id, lane] : base.lane_graph->lanes()) {
            CHECK(mean_bumper_gap(high, id) <= kHighDensityGap);
            CHECK(mean_bumper_gap(high, id) <= mean_bumper_gap(mid, id));
            CHECK(mean_bumper_gap(mid, id) <= mean_bumper_gap(low, id));
        }
        for (const auto* s : {&low, &mid, &high}) {
            CHECK(s->ego == base.ego);
            CHECK(s->lane_graph == base.lane_graph);
            CHECK(s->route.lane_ids() == base.route.lane_ids());
            CHECK(s->logged_futures == base.logged_futures);
            CHECK_FALSE(any_overlap(*s));
            CHECK_NOTHROW(validate_scenario(*s));
            CHECK(s->tag == base.tag + ":" + to_string(s == &low ? DensityLevel::low
                                                       : s == &mid ? DensityLevel::mid
                                                                   : DensityLevel::high));
        }
        auto contains = [](const Scenario& big, const Scenario& small) {
            for (const auto& a : small.agents)
                if (std::find(big.agents.begin(), big.agents.end(), a) == big.agents.end()) return false;
            return true;
        };
        CHECK(contains(mid, low));
        CHECK(contains(high, mid));
        CHECK(contains(low, base));
        CHECK(serialize_scenario(augment_density(base, DensityLevel::mid, 4)) == serialize_scenario(mid));
    }
}

TEST_CASE("low density leaves sparse lanes alone")
{
    const Scenario base = generate_scenario(SuiteKind::car_following, 0, 3);
    const Scenario low = augment_density(base, DensityLevel::low, 1);
    for (const auto& [id, lane] : base.lane_graph->lanes())
        if (mean_bumper_gap(base, id) >= kLowDensityGap) CHECK(mean_bumper_gap(low, id) >= kLowDensityGap);
}
