#include "support.hpp"

#include "cloop/error.hpp"
#include "cloop/metrics.hpp"

#include <doctest.h>

#include <functional>
#include <random>

using namespace cloop;
using namespace testing_support;

namespace {

RolloutLog make_log(int steps, const std::function<WorldSnapshot(int)>& at, double dt = 0.1)
{
    RolloutLog log;
    log.dt = dt;
    for (int k = 0; k <= steps; ++k) log.snapshots.push_back(at(k));
    return log;
}

WorldSnapshot ego_only(const AgentState& ego)
{
    return {ego, {}};
}

// Central differences, one-sided at the ends.
std::vector<double> fd(const std::vector<double>& v, double dt)
{
    const std::size_t n = v.size();
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0) d[k] = (v[1] - v[0]) / dt;
        else if (k == n - 1) d[k] = (v[n - 1] - v[n - 2]) / dt;
        else d[k] = (v[k + 1] - v[k - 1]) / (2 * dt);
    }
    return d;
}

std::vector<double> bins16(const std::vector<double>& v, double lo, double hi)
{
    std::vector<double> h(16, 0.0);
    for (double x : v) {
        double f = (x - lo) / (hi - lo) * 16;
        int b = f < 0 ? 0 : (f >= 16 ? 15 : static_cast<int>(f));
        h[b] += 1;
    }
    return h;
}

double jsd(const std::vector<double>& p, const std::vector<double>& q)
{
    double sp = 0, sq = 0;
    for (double x : p) sp += x;
    for (double x : q) sq += x;
    double d = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i] / sp, b = q[i] / sq, m = (a + b) / 2;
        if (a > 0) d += a * std::log(a / m) / 2;
        if (b > 0) d += b * std::log(b / m) / 2;
    }
    return d / std::log(2.0);
}

} // namespace

TEST_CASE("compose_cls worked examples")
{
    const MetricWeights w;
    CHECK(compose_cls({1, 1, 1, 1}, {}, w).composite == 100.0);
    CHECK(compose_cls({1, 0.8, 1, 1}, {}, w).composite == 93.75);
    CHECK(compose_cls({1, 1, 1, 1}, {true, false}, w).composite == 0.0);
    CHECK(compose_cls({1, 1, 1, 1}, {false, true}, w).composite == 0.0);
    MetricWeights bad;
    bad.ttc = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("CLS dominance and monotonicity on random tuples")
{
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const MetricWeights w{0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng)};
        SoftMetrics s{u(rng), u(rng), u(rng), u(rng)};
        const HardMultipliers h{u(rng) < 0.2, u(rng) < 0.2};
        const double c = compose_cls(s, h, w).composite;
        if (h.at_fault_collision || h.drivable_area_violation) CHECK(c == 0.0);
        CHECK(c >= 0.0);
        CHECK(c <= 100.0);
        s.progress = std::min(1.0, s.progress + 0.1);
        CHECK(compose_cls(s, h, w).composite >= c);
    }
}

TEST_CASE("detect_collisions reports first contact once per agent")
{
    const auto log = make_log(40, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, 0, 0, 0));
        s.agents.push_back(vehicle(1, 20 - k, 0, 10, std::numbers::pi));
        s.agents.push_back(vehicle(2, 0, 10, 0));
        return s;
    });
    const auto ev = detect_collisions(log);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].other_id == 1);
    CHECK(ev[0].step == 16); // centres 4 m apart: bumpers touch
    CHECK(ev[0].contact_centroid.x > 0.0);
    CHECK(detect_collisions(make_log(10, [](int) { return ego_only(vehicle(kEgoId, 0, 0, 0)); })).empty());
}

TEST_CASE("grazing pass at 1 cm is not a collision")
{
    const auto log = make_log(60, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, 0, 0, 0));
        s.agents.push_back(vehicle(1, -30 + k, 2.01, 10));
        return s;
    });
    CHECK(detect_collisions(log).empty());
}

TEST_CASE("at-fault classification")
{
    const auto g = road(true);
    const Route route({1}, *g);
    // Rear-ending a stopped leader.
    auto rear_end = make_log(20, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, k * 0.5, 0, 5));
        s.agents.push_back(vehicle(1, 10, 0, 0));
        return s;
    });
    auto ev = detect_collisions(rear_end);
    REQUIRE(ev.size() == 1);
    CHECK(classify_at_fault(ev[0], rear_end, route, *g));
    // Stopped ego struck from behind.
    auto struck = make_log(20, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, 10, 0, 0));
        s.agents.push_back(vehicle(1, k * 0.5, 0, 5));
        return s;
    });
    ev = detect_collisions(struck);
    REQUIRE(ev.size() == 1);
    CHECK_FALSE(classify_at_fault(ev[0], struck, route, *g));
    // Hit from behind while outside the route corridor.
    auto outside = make_log(20, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, 10, 2.5, 0));
        s.agents.push_back(vehicle(1, k * 0.5, 3.5, 5));
        return s;
    });
    ev = detect_collisions(outside);
    REQUIRE(ev.size() == 1);
    CHECK(classify_at_fault(ev[0], outside, route, *g));
}

TEST_CASE("drivable-area compliance thresholds")
{
    const auto g = road(false);
    auto along = [](double y, int off_steps) {
        return make_log(30, [=](int k) { return ego_only(vehicle(kEgoId, 10 + k, k < off_steps ? y : 0.0, 10)); });
    };
    CHECK_FALSE(drivable_area_compliance(along(0.0, 0), *g));
    CHECK(drivable_area_compliance(along(2.0, 30), *g));
    // One step with a corner 0.3 m out.
    CHECK_FALSE(drivable_area_compliance(along(1.05, 1), *g));
    // Slightly out for 0.5 s.
    CHECK(drivable_area_compliance(along(1.05, 5), *g));
    // 0.7 m out for a single step.
    CHECK(drivable_area_compliance(along(1.45, 1), *g));
}

TEST_CASE("time to collision")
{
    auto log = make_log(5, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, 5.0 * k * 0.1, 0, 5));
        s.agents.push_back(vehicle(1, 20.5, 0, 0));
        return s;
    });
    const auto r = time_to_collision_score(log);
    CHECK(r.min_ttc == doctest::Approx(2.7)); // gap 13.5 m at the last step
    CHECK(r.min_step == 5);
    CHECK(r.score == 1.0);
    const auto empty = time_to_collision_score(make_log(5, [](int) { return ego_only(vehicle(kEgoId, 0, 0, 5)); }));
    CHECK(std::isinf(empty.min_ttc));
    CHECK(empty.score == 1.0);
    auto tail = make_log(5, [](int k) {
        WorldSnapshot s = ego_only(vehicle(kEgoId, k * 0.5, 0, 5));
        s.agents.push_back(vehicle(1, 4.5 + 2.5 + k * 0.5, 0, 0));
        return s;
    });
    const auto t = time_to_collision_score(tail);
    CHECK(t.min_ttc == doctest::Approx(0.5));
    CHECK(t.score == 0.0);
}

TEST_CASE("progress, speed limit and comfort examples")
{
    const auto g = road(false, 200);
    const Route route({1}, *g);
    const auto full = make_log(20, [](int k) { return ego_only(vehicle(kEgoId, 10 * k, 0, 10)); });
    CHECK(ego_progress(full, route) == doctest::Approx(200.0));
    CHECK(progress_score(full, route, 200.0) == doctest::Approx(1.0));
    const auto half = make_log(10, [](int k) { return ego_only(vehicle(kEgoId, 5 * k, 0, 10)); });
    CHECK(progress_score(half, route, 100.0) == doctest::Approx(0.5));
    const auto back = make_log(10, [](int k) { return ego_only(vehicle(kEgoId, k < 5 ? 5 * k : 40 - 5 * k, 0, 10)); });
    CHECK(ego_progress(back, route) == doctest::Approx(20.0));
    const auto still = make_log(10, [](int) { return ego_only(vehicle(kEgoId, 0, 0, 0)); });
    CHECK(progress_score(still, route, 50.0) == 0.0);
    CHECK(progress_score(still, route, 0.5) == 1.0);

    CHECK(speed_limit_score(full, *g) == 1.0);
    const auto twice = make_log(10, [](int k) { return ego_only(vehicle(kEgoId, 3 * k, 0, 30)); });
    CHECK(speed_limit_score(twice, *g) == 0.0);
    const auto some = make_log(9, [](int k) { return ego_only(vehicle(kEgoId, 3 * k, 0, k < 5 ? 16.5 : 10)); });
    CHECK(speed_limit_score(some, *g) == doctest::Approx(0.95));

    const auto cv = comfort_score(full);
    CHECK(cv.score == 1.0);
    CHECK(cv.max_jerk == doctest::Approx(0.0));
    const auto stop = make_log(10, [](int k) { return ego_only(vehicle(kEgoId, k < 5 ? 1.5 * k : 7.5, 0, k < 5 ? 15 : 0)); });
    CHECK(comfort_score(stop).score == 0.0);
}

TEST_CASE("comfort maxima on a weave match an independent stencil")
{
    const double dt = 0.1;
    for (double amp : {0.3, 2.0}) {
        const auto log = make_log(120, [&](int k) {
            const double t = k * dt;
            const double x = 10 * t, y = amp * std::sin(0.8 * t);
            const double h = std::atan2(amp * 0.8 * std::cos(0.8 * t), 10.0);
            return ego_only(vehicle(kEgoId, x, y, 10, h));
        });
        std::vector<double> x, y, h;
        for (const auto& s : log.snapshots) {
            x.push_back(s.ego.pose.x);
            y.push_back(s.ego.pose.y);
            h.push_back(s.ego.pose.heading());
        }
        const auto ax = fd(fd(x, dt), dt), ay = fd(fd(y, dt), dt);
        const auto jx = fd(ax, dt), jy = fd(ay, dt), w = fd(h, dt);
        double lon_min = 1e9, lon_max = -1e9, lat = 0, jerk = 0, yaw = 0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double l = ax[k] * std::cos(h[k]) + ay[k] * std::sin(h[k]);
            lon_min = std::min(lon_min, l);
            lon_max = std::max(lon_max, l);
            lat = std::max(lat, std::abs(-ax[k] * std::sin(h[k]) + ay[k] * std::cos(h[k])));
            jerk = std::max(jerk, std::hypot(jx[k], jy[k]));
            yaw = std::max(yaw, std::abs(w[k]));
        }
        const auto r = comfort_score(log);
        CHECK(r.min_lon_accel == doctest::Approx(lon_min).epsilon(1e-9));
        CHECK(r.max_lon_accel == doctest::Approx(lon_max).epsilon(1e-9));
        CHECK(r.max_abs_lat_accel == doctest::Approx(lat).epsilon(1e-9));
        CHECK(r.max_jerk == doctest::Approx(jerk).epsilon(1e-9));
        CHECK(r.max_abs_yaw_rate == doctest::Approx(yaw).epsilon(1e-9));
        const ComfortThresholds th;
        const bool ok = lon_min >= th.min_lon_accel && lon_max <= th.max_lon_accel && lat <= th.max_lat_accel &&
                        jerk <= th.max_jerk && yaw <= th.max_yaw_rate;
        CHECK(r.score == (ok ? 1.0 : 0.0));
    }
}

TEST_CASE("ade examples and properties")
{
    std::vector<std::vector<Vec2>> a(1), b(1), c(1);
    for (int k = 0; k <= 80; ++k) {
        a[0].push_back({double(k), 0});
        b[0].push_back({double(k), 1});
        c[0].push_back({double(k), 2.0 * k / 80});
    }
    CHECK(ade(a, a, 80) == 0.0);
    CHECK(ade(a, b, 80) == doctest::Approx(1.0));
    // Ramp 0..2 m sampled at 1..80: mean of 2k/80.
    CHECK(ade(a, c, 80) == doctest::Approx(2.0 * 81 / 2 / 80));
    CHECK(ade(a, c, 80) <= ade(a, b, 80) + ade(b, c, 80));
    CHECK_THROWS_AS(ade(a, b, 81), Error);
}

TEST_CASE("histogram and Jensen-Shannon divergence")
{
    const std::vector<double> v{-1, 0, 0.5, 1.99, 2, 10};
    const auto h = histogram(v, 0.0, 2.0, 4);
    CHECK(h == std::vector<double>{2, 1, 0, 3});
    const std::vector<double> p{1, 0, 0, 0}, q{0, 0, 0, 1};
    CHECK(js_divergence(p, q) == doctest::Approx(1.0));
    CHECK(js_divergence(p, p) == 0.0);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(16), y(16);
        for (int j = 0; j < 16; ++j) x[j] = std::floor(u(rng)), y[j] = std::floor(u(rng));
        x[0] += 1;
        y[3] += 1;
        CHECK(js_divergence(x, y) == doctest::Approx(jsd(x, y)).epsilon(1e-12));
        CHECK(js_divergence(x, y) == doctest::Approx(js_divergence(y, x)).epsilon(1e-12));
    }
}

TEST_CASE("realism: replay is (1,1,1); perturbed speeds match the oracle")
{
    const auto g = road(true);
    const Scenario scn = scenario(g, vehicle(kEgoId, 20, 0, 10), {vehicle(1, 50, 0, 8), vehicle(2, 30, 3.5, 12)}, 100);
    auto replay = make_log(100, [&](int k) {
        WorldSnapshot s{AgentState(scn.ego), {}};
        s.ego.pose = scn.logged(kEgoId)->at(k).pose;
        for (const auto& a : scn.agents) {
            AgentState b = a;
            b.pose = scn.logged(a.id)->at(k).pose;
            b.speed = scn.logged(a.id)->at(k).speed;
            s.agents.push_back(b);
        }
        return s;
    });
    const auto same = realism_report(replay, scn);
    CHECK(same.ade == 0.0);
    CHECK(same.kinematic == 1.0);
    CHECK(same.interaction == 1.0);
    CHECK(same.map == 1.0);
    CHECK(same.composite == 1.0);

    RolloutLog pert = replay;
    for (std::size_t k = 0; k < pert.snapshots.size(); ++k)
        for (auto& a : pert.snapshots[k].agents) {
            a.speed *= 1.0 + 0.3 * std::sin(0.2 * k + a.id);
            a.pose.x += 0.02 * k * k * 0.01 * a.id;
        }
    const auto r = realism_report(pert, scn);

    std::vector<double> ss, ls, sa, la, sn, ln;
    for (std::size_t i = 0; i < scn.agents.size(); ++i) {
        std::vector<double> sv, lv;
        for (std::size_t k = 0; k < pert.snapshots.size(); ++k) {
            sv.push_back(pert.snapshots[k].agents[i].speed);
            lv.push_back(replay.snapshots[k].agents[i].speed);
        }
        const auto sd = fd(sv, 0.1), ld = fd(lv, 0.1);
        ss.insert(ss.end(), sv.begin(), sv.end());
        ls.insert(ls.end(), lv.begin(), lv.end());
        sa.insert(sa.end(), sd.begin(), sd.end());
        la.insert(la.end(), ld.begin(), ld.end());
    }
    for (std::size_t k = 0; k < pert.snapshots.size(); ++k)
        for (std::size_t i = 0; i < scn.agents.size(); ++i) {
            auto nn = [&](const WorldSnapshot& s) {
                double d = distance(s.agents[i].pose.position(), s.ego.pose.position());
                for (std::size_t j = 0; j < s.agents.size(); ++j)
                    if (j != i) d = std::min(d, distance(s.agents[i].pose.position(), s.agents[j].pose.position()));
                return d;
            };
            sn.push_back(nn(pert.snapshots[k]));
            ln.push_back(nn(replay.snapshots[k]));
        }
    const double kin = 1 - 0.5 * (jsd(bins16(ss, 0, 30), bins16(ls, 0, 30)) + jsd(bins16(sa, -6, 6), bins16(la, -6, 6)));
    const double inter = 1 - jsd(bins16(sn, 0, 50), bins16(ln, 0, 50));
    CHECK(r.kinematic == doctest::Approx(kin).epsilon(1e-9));
    CHECK(r.interaction == doctest::Approx(inter).epsilon(1e-9));
    CHECK(r.kinematic < 1.0);
    for (double c : {r.kinematic, r.interaction, r.map, r.composite}) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }

    RolloutLog off = replay;
    for (auto& s : off.snapshots)
        for (auto& a : s.agents) a.pose.y = 40;
    CHECK(realism_report(off, scn).map == 0.0);

    Scenario missing = scn;
    missing.logged_futures.erase(1);
    CHECK_THROWS_AS(realism_report(replay, missing), Error);
}

TEST_CASE("aggregation means, tags and deltas")
{
    auto rec = [](std::string id, std::string tag, BackgroundKind b, double c) {
        ScenarioEvaluation e;
        e.scenario_id = id;
        e.tag = tag;
        e.planner = "p";
        e.background = b;
        e.score.composite = c;
        return e;
    };
    const auto one = aggregate_benchmark({rec("a", "x", BackgroundKind::idm_reactive, 70)});
    CHECK(one.by_planner.at("p").at(BackgroundKind::idm_reactive).mean == 70.0);

    auto internal = rec("d", "y", BackgroundKind::idm_reactive, 100);
    internal.termination = Termination::internal_error;
    const auto rep = aggregate_benchmark({rec("a", "x", BackgroundKind::idm_reactive, 0),
                                          rec("b", "x", BackgroundKind::idm_reactive, 100),
                                          rec("c", "y", BackgroundKind::idm_reactive, 40),
                                          rec("a", "x", BackgroundKind::learned_reactive, 20),
                                          rec("b", "x", BackgroundKind::learned_reactive, 60),
                                          rec("c", "y", BackgroundKind::learned_reactive, 70), internal});
    CHECK(rep.internal_errors == 1);
    CHECK(rep.by_planner.at("p").at(BackgroundKind::idm_reactive).mean == doctest::Approx(140.0 / 3));
    CHECK(rep.by_planner_tag.at("p").at("x").at(BackgroundKind::idm_reactive).mean == doctest::Approx(50.0));
    CHECK(rep.by_planner_tag.at("p").at("y").at(BackgroundKind::learned_reactive).mean == doctest::Approx(70.0));
    CHECK(*score_delta(rep, "p", BackgroundKind::idm_reactive, BackgroundKind::learned_reactive, "x") ==
          doctest::Approx(-10.0));
    CHECK(*score_delta(rep, "p", BackgroundKind::idm_reactive, BackgroundKind::learned_reactive) ==
          doctest::Approx(10.0 / 3));
    CHECK_FALSE(score_delta(rep, "p", BackgroundKind::non_reactive_replay, BackgroundKind::idm_reactive));
    CHECK(std::is_sorted(rep.records.begin(), rep.records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.scenario_id, a.planner, a.background) < std::tie(b.scenario_id, b.planner, b.background);
    }));
}
