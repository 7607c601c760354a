#include "cloop/generators.hpp"

#include "cloop/error.hpp"
#include "cloop/idm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cloop {

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLaneChangeDuration = 4.0;
constexpr double kMergeTrigger = 80.0;
constexpr int kMaxAttempts = 200;

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto p : parts) h = splitmix(h ^ p);
    return h;
}

class Rng
{
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }

private:
    std::mt19937_64 gen_;
};

double quintic(double u)
{
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

struct RoadLane
{
    int id;
    double y;
    double x0;
    double x1;
    double limit;
};

// Parallel straight lanes in a local frame; x runs along the direction of travel.
struct Road
{
    Vec2 origin;
    double heading = 0.0;
    std::vector<RoadLane> lanes; // ordered right to left

    Vec2 world(double x, double y) const { return origin + rotate({x, y}, heading); }
};

struct Expert
{
    int id = 0;
    int road = 0;
    int lane = 0;
    double x = 0.0;
    double y = 0.0;
    double v = 0.0;
    double heading = 0.0; // local
    double length = 4.5;
    double width = 2.0;
    double v0 = 15.0;

    bool changing = false;
    int target = -1;
    double lc_t0 = 0.0;
    double lc_y0 = 0.0;
    double lc_y1 = 0.0;

    double change_time = kInf; // scripted lane change
    int change_dir = 0;        // +1 left, -1 right
    double force_time = kInf;  // skip gap acceptance from this time on
    bool merges = false;       // leaves an ending lane near its end
    double slow_time = kInf;
    double slow_v0 = 0.0;

    Trajectory log;
};

class ExpertSim
{
public:
    std::vector<Road> roads;
    std::vector<Expert> experts;
    double dt = kDefaultDt;
    IdmParams idm;

    void run(int steps)
    {
        for (auto& e : experts) record(e, 0.0);
        for (int k = 0; k < steps; ++k) {
            const double t = k * dt;
            std::vector<double> acc(experts.size());
            for (std::size_t i = 0; i < experts.size(); ++i) {
                decide_lane_change(i, t);
                acc[i] = acceleration(i, t);
            }
            for (std::size_t i = 0; i < experts.size(); ++i) advance(experts[i], acc[i], t);
            for (auto& e : experts) record(e, t + dt);
        }
    }

    bool valid(const LaneGraph& graph) const
    {
        const std::size_t n = experts.front().log.size();
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<OrientedBox> boxes;
            for (const auto& e : experts) {
                const Pose2D& p = e.log[k].pose;
                if (!graph.in_drivable_area(p.position())) return false;
                boxes.push_back(make_box(p, e.length, e.width));
            }
            for (std::size_t i = 0; i < boxes.size(); ++i)
                for (std::size_t j = i + 1; j < boxes.size(); ++j)
                    if (box_signed_distance(boxes[i], boxes[j]) < 0.3) return false;
        }
        return true;
    }

    Scenario to_scenario(const std::string& id, const std::string& tag, const std::vector<int>& route, int horizon) const
    {
        std::vector<LaneSpec> specs;
        for (const Road& r : roads) {
            for (std::size_t k = 0; k < r.lanes.size(); ++k) {
                const RoadLane& l = r.lanes[k];
                LaneSpec s;
                s.id = l.id;
                s.centerline = {r.world(l.x0, l.y), r.world(l.x1, l.y)};
                s.width = kLaneWidth;
                s.speed_limit = l.limit;
                if (k + 1 < r.lanes.size()) s.left_neighbor = r.lanes[k + 1].id;
                if (k > 0) s.right_neighbor = r.lanes[k - 1].id;
                specs.push_back(std::move(s));
            }
        }
        Scenario scn;
        scn.id = id;
        scn.tag = tag;
        scn.lane_graph = std::make_shared<LaneGraph>(specs);
        scn.route = Route(route, *scn.lane_graph);
        scn.horizon_steps = horizon;
        scn.dt = dt;
        for (const auto& e : experts) {
            AgentState a;
            a.id = e.id;
            a.pose = e.log.front().pose;
            a.speed = e.log.front().speed;
            a.length = e.length;
            a.width = e.width;
            if (e.id == kEgoId) scn.ego = a;
            else scn.agents.push_back(a);
            scn.logged_futures[e.id] = e.log;
        }
        std::sort(scn.agents.begin(), scn.agents.end(), [](const AgentState& a, const AgentState& b) { return a.id < b.id; });
        return scn;
    }

private:
    static double lateral_half(const Expert& e)
    {
        return 0.5 * (e.width * std::cos(e.heading) + e.length * std::abs(std::sin(e.heading)));
    }

    bool in_band(const Expert& e, double lo, double hi) const
    {
        const double h = lateral_half(e);
        return e.y + h >= lo && e.y - h <= hi;
    }

    double band_lo(const Expert& e) const
    {
        const auto& lanes = roads[e.road].lanes;
        double lo = lanes[e.lane].y;
        if (e.changing) lo = std::min(lo, lanes[e.target].y);
        return lo - 0.5 * kLaneWidth;
    }

    double band_hi(const Expert& e) const
    {
        const auto& lanes = roads[e.road].lanes;
        double hi = lanes[e.lane].y;
        if (e.changing) hi = std::max(hi, lanes[e.target].y);
        return hi + 0.5 * kLaneWidth;
    }

    double idm_accel(const Expert& e, double gap, double lead_speed, double t) const
    {
        IdmParams p = idm;
        p.v0 = t >= e.slow_time ? e.slow_v0 : e.v0;
        if (gap == kInf) return idm_acceleration(e.v, kFreeRoad, 0.0, p);
        return idm_acceleration(e.v, std::max(gap, 0.1), e.v - lead_speed, p);
    }

    double acceleration(std::size_t i, double t) const
    {
        const Expert& e = experts[i];
        const double lo = band_lo(e);
        const double hi = band_hi(e);
        double gap = kInf;
        double lead_speed = 0.0;
        for (std::size_t j = 0; j < experts.size(); ++j) {
            const Expert& o = experts[j];
            if (j == i || o.road != e.road || o.x <= e.x || !in_band(o, lo, hi)) continue;
            const double g = o.x - e.x - 0.5 * (e.length + o.length);
            if (g < gap) {
                gap = g;
                lead_speed = o.v;
            }
        }
        const RoadLane& lane = roads[e.road].lanes[e.lane];
        if (!e.changing && lane.x1 < road_end(e.road) - 1.0) {
            const double g = lane.x1 - e.x - 0.5 * e.length - 2.0;
            if (g < gap) {
                gap = g;
                lead_speed = 0.0;
            }
        }
        return std::max(-8.0, idm_accel(e, gap, lead_speed, t));
    }

    double road_end(int road) const
    {
        double end = -kInf;
        for (const auto& l : roads[static_cast<std::size_t>(road)].lanes) end = std::max(end, l.x1);
        return end;
    }

    bool gap_acceptable(std::size_t i, int target, double t) const
    {
        const Expert& e = experts[i];
        const RoadLane& tl = roads[e.road].lanes[static_cast<std::size_t>(target)];
        if (e.x < tl.x0 + 10.0 || e.x > tl.x1 - 30.0) return false;
        const double lo = tl.y - 0.5 * kLaneWidth;
        const double hi = tl.y + 0.5 * kLaneWidth;
        for (std::size_t j = 0; j < experts.size(); ++j) {
            const Expert& o = experts[j];
            if (j == i || o.road != e.road || !in_band(o, lo, hi)) continue;
            const double g = std::abs(o.x - e.x) - 0.5 * (e.length + o.length);
            if (o.x >= e.x) {
                if (g < std::max(5.0, 0.4 * e.v) || idm_accel(e, g, o.v, t) < -2.0) return false;
            } else {
                if (g < std::max(5.0, 0.4 * o.v) || idm_accel(o, g, e.v, t) < -3.0) return false;
            }
        }
        return true;
    }

    void decide_lane_change(std::size_t i, double t)
    {
        Expert& e = experts[i];
        if (e.changing || e.v < 3.0) return;
        const auto& lanes = roads[e.road].lanes;
        int target = -1;
        if (t >= e.change_time && e.change_dir != 0) {
            const int k = e.lane + e.change_dir;
            if (k >= 0 && k < static_cast<int>(lanes.size())) target = k;
        }
        if (e.merges && e.lane + 1 < static_cast<int>(lanes.size()) && lanes[e.lane].x1 - e.x < kMergeTrigger)
            target = e.lane + 1;
        if (target < 0) return;
        if (t < e.force_time && !gap_acceptable(i, target, t)) return;
        e.changing = true;
        e.target = target;
        e.lc_t0 = t;
        e.lc_y0 = e.y;
        e.lc_y1 = lanes[static_cast<std::size_t>(target)].y;
    }

    void advance(Expert& e, double a, double t)
    {
        const double x_old = e.x;
        const double y_old = e.y;
        e.v = std::max(0.0, e.v + a * dt);
        e.x += e.v * dt;
        if (e.changing) {
            const double u = (t + dt - e.lc_t0) / kLaneChangeDuration;
            if (u >= 1.0) {
                e.y = e.lc_y1;
                e.lane = e.target;
                e.changing = false;
                e.change_dir = 0;
                e.merges = false;
            } else {
                e.y = e.lc_y0 + (e.lc_y1 - e.lc_y0) * quintic(u);
            }
        }
        const double dx = e.x - x_old;
        const double dy = e.y - y_old;
        if (std::hypot(dx, dy) > 1e-6) e.heading = std::atan2(dy, dx);
        else if (!e.changing) e.heading = 0.0;
    }

    void record(Expert& e, double t)
    {
        const Road& r = roads[static_cast<std::size_t>(e.road)];
        double speed = e.v;
        if (!e.log.empty()) speed = distance(r.world(e.x, e.y), e.log.back().pose.position()) / dt;
        e.log.push_back({t, Pose2D(r.world(e.x, e.y), r.heading + e.heading), speed});
    }
};

Expert make_expert(int id, int road, int lane, double x, const RoadLane& l, double v, double v0)
{
    Expert e;
    e.id = id;
    e.road = road;
    e.lane = lane;
    e.x = x;
    e.y = l.y;
    e.v = v;
    e.v0 = v0;
    return e;
}

// Places up to `count` vehicles in [lo, hi] keeping `spacing` between centers.
std::vector<double> spread(Rng& rng, int count, double lo, double hi, double spacing, std::vector<double> taken)
{
    std::vector<double> out;
    for (int n = 0; n < count; ++n) {
        for (int attempt = 0; attempt < 50; ++attempt) {
            const double x = rng.uniform(lo, hi);
            const bool clear = std::all_of(taken.begin(), taken.end(), [&](double o) { return std::abs(o - x) >= spacing; });
            if (!clear) continue;
            taken.push_back(x);
            out.push_back(x);
            break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Road straight_road(int lanes, double limit, double length, double heading)
{
    Road r;
    r.heading = heading;
    for (int k = 0; k < lanes; ++k) r.lanes.push_back({k + 1, k * kLaneWidth, 0.0, length, limit});
    return r;
}

void maybe_script_change(Expert& e, Rng& rng, int lanes, double p, double t_lo, double t_hi)
{
    if (lanes < 2 || !rng.chance(p)) return;
    int dir = rng.chance(0.5) ? 1 : -1;
    if (e.lane + dir < 0 || e.lane + dir >= lanes) dir = -dir;
    e.change_dir = dir;
    e.change_time = rng.uniform(t_lo, t_hi);
}

struct Built
{
    ExpertSim sim;
    std::vector<int> route;
};

Built build_car_following(Rng& rng)
{
    Built b;
    const double limit = rng.uniform(12.0, 17.0);
    const int lanes = rng.integer(1, 2);
    b.sim.roads.push_back(straight_road(lanes, limit, 900.0, rng.uniform(-std::numbers::pi, std::numbers::pi)));
    const auto& ls = b.sim.roads[0].lanes;
    int next = 1;
    const double ego_x = 150.0;
    const double ego_v = limit * rng.uniform(0.6, 0.95);
    b.sim.experts.push_back(make_expert(kEgoId, 0, 0, ego_x, ls[0], ego_v, limit * rng.uniform(0.9, 1.0)));

    double pos = ego_x;
    const int leaders = rng.integer(2, 4);
    for (int i = 0; i < leaders; ++i) {
        pos += rng.uniform(22.0, 50.0);
        Expert e = make_expert(next++, 0, 0, pos, ls[0], ego_v * rng.uniform(0.85, 1.05), limit * rng.uniform(0.7, 1.0));
        b.sim.experts.push_back(e);
    }
    if (rng.chance(0.6)) {
        Expert& slow = b.sim.experts[static_cast<std::size_t>(rng.integer(1, leaders))];
        slow.slow_time = rng.uniform(2.0, 8.0);
        slow.slow_v0 = limit * rng.uniform(0.1, 0.5);
    }
    pos = ego_x;
    for (int i = rng.integer(0, 2); i > 0; --i) {
        pos -= rng.uniform(20.0, 45.0);
        b.sim.experts.push_back(
            make_expert(next++, 0, 0, pos, ls[0], ego_v * rng.uniform(0.9, 1.1), limit * rng.uniform(0.8, 1.0)));
    }
    if (lanes == 2) {
        for (double x : spread(rng, rng.integer(2, 4), ego_x - 60.0, ego_x + 160.0, 25.0, {})) {
            Expert e = make_expert(next++, 0, 1, x, ls[1], limit * rng.uniform(0.6, 0.95), limit * rng.uniform(0.75, 1.0));
            maybe_script_change(e, rng, lanes, 0.2, 2.0, 10.0);
            b.sim.experts.push_back(e);
        }
    }
    b.route = {ls[0].id};
    return b;
}

Built build_lane_change(Rng& rng)
{
    Built b;
    const double limit = rng.uniform(12.0, 17.0);
    const int lanes = rng.integer(2, 3);
    b.sim.roads.push_back(straight_road(lanes, limit, 900.0, rng.uniform(-std::numbers::pi, std::numbers::pi)));
    const auto& ls = b.sim.roads[0].lanes;
    const int ego_lane = lanes == 3 ? rng.integer(0, 1) : 0;
    const double ego_x = 150.0;
    Expert ego = make_expert(kEgoId, 0, ego_lane, ego_x, ls[static_cast<std::size_t>(ego_lane)],
                             limit * rng.uniform(0.65, 0.9), limit * rng.uniform(0.9, 1.0));
    ego.change_dir = 1;
    ego.change_time = rng.uniform(1.0, 3.0);
    ego.force_time = 6.0;
    b.sim.experts.push_back(ego);

    int next = 1;
    for (int k = 0; k < lanes; ++k) {
        std::vector<double> taken;
        if (k == ego_lane) taken.push_back(ego_x);
        const int count = k == ego_lane ? 1 : rng.integer(1, 2);
        for (double x : spread(rng, count, ego_x - 55.0, ego_x + 135.0, 18.0, taken)) {
            Expert e = make_expert(next++, 0, k, x, ls[static_cast<std::size_t>(k)], limit * rng.uniform(0.6, 0.95),
                                   limit * rng.uniform(0.75, 1.0));
            maybe_script_change(e, rng, lanes, 0.25, 2.0, 9.0);
            b.sim.experts.push_back(e);
        }
    }
    b.route = {ls[static_cast<std::size_t>(ego_lane)].id, ls[static_cast<std::size_t>(ego_lane + 1)].id};
    return b;
}

Built build_merge(Rng& rng)
{
    Built b;
    const double limit = rng.uniform(12.0, 16.0);
    const double lane_end = rng.uniform(260.0, 320.0);
    Road r = straight_road(2, limit, 900.0, rng.uniform(-std::numbers::pi, std::numbers::pi));
    r.lanes[0].x1 = lane_end;
    b.sim.roads.push_back(r);
    const auto& ls = b.sim.roads[0].lanes;
    const double ego_x = lane_end - rng.uniform(150.0, 190.0);
    b.sim.experts.push_back(
        make_expert(kEgoId, 0, 1, ego_x, ls[1], limit * rng.uniform(0.6, 0.85), limit * rng.uniform(0.9, 1.0)));
    int next = 1;
    for (double x : spread(rng, rng.integer(2, 3), lane_end - 210.0, lane_end - 90.0, 20.0, {})) {
        Expert e = make_expert(next++, 0, 0, x, ls[0], limit * rng.uniform(0.6, 0.9), limit * rng.uniform(0.8, 1.0));
        e.merges = true;
        b.sim.experts.push_back(e);
    }
    for (double x : spread(rng, rng.integer(2, 3), ego_x - 60.0, ego_x + 140.0, 20.0, {ego_x}))
        b.sim.experts.push_back(
            make_expert(next++, 0, 1, x, ls[1], limit * rng.uniform(0.6, 0.9), limit * rng.uniform(0.8, 1.0)));
    b.route = {ls[1].id};
    return b;
}

Built build_intersection(Rng& rng)
{
    Built b;
    const double limit = rng.uniform(10.0, 14.0);
    Road main;
    main.lanes.push_back({1, 0.0, -250.0, 450.0, limit});
    Road north;
    north.origin = {-2.0, 0.0};
    north.heading = std::numbers::pi / 2.0;
    north.lanes.push_back({2, 0.0, -250.0, 250.0, limit});
    Road south;
    south.origin = {2.0, 0.0};
    south.heading = -std::numbers::pi / 2.0;
    south.lanes.push_back({3, 0.0, -250.0, 250.0, limit});
    b.sim.roads = {main, north, south};

    const double ego_x = -rng.uniform(90.0, 130.0);
    const double ego_v = limit * rng.uniform(0.7, 0.95);
    b.sim.experts.push_back(make_expert(kEgoId, 0, 0, ego_x, main.lanes[0], ego_v, limit * rng.uniform(0.9, 1.0)));
    int next = 1;
    if (rng.chance(0.7))
        b.sim.experts.push_back(make_expert(next++, 0, 0, ego_x + rng.uniform(25.0, 60.0), main.lanes[0],
                                            ego_v * rng.uniform(0.9, 1.05), limit * rng.uniform(0.8, 1.0)));
    if (rng.chance(0.5))
        b.sim.experts.push_back(make_expert(next++, 0, 0, ego_x - rng.uniform(20.0, 40.0), main.lanes[0], ego_v,
                                            limit * rng.uniform(0.8, 1.0)));
    for (int road = 1; road <= 2; ++road) {
        const RoadLane& l = b.sim.roads[static_cast<std::size_t>(road)].lanes[0];
        for (double x : spread(rng, rng.integer(1, 2), -140.0, -30.0, 25.0, {}))
            b.sim.experts.push_back(
                make_expert(next++, road, 0, x, l, limit * rng.uniform(0.6, 0.95), limit * rng.uniform(0.8, 1.0)));
    }
    b.route = {1};
    return b;
}

Built build_cut_in(Rng& rng)
{
    Built b;
    const double limit = rng.uniform(11.0, 17.0);
    b.sim.roads.push_back(straight_road(2, limit, 900.0, rng.uniform(-std::numbers::pi, std::numbers::pi)));
    const auto& ls = b.sim.roads[0].lanes;
    const double ego_x = 150.0;
    const double fast = limit * rng.uniform(0.85, 1.0);
    const double slow = fast - rng.uniform(0.5, 4.5);
    // Either the ego or a background vehicle cuts in; the follower is always a
    // background vehicle so its yield is in the corpus.
    const bool ego_cuts = rng.chance(0.5);
    int next = 1;
    Expert ego = make_expert(kEgoId, 0, ego_cuts ? 0 : 1, ego_x, ls[ego_cuts ? 0 : 1], ego_cuts ? slow : fast,
                             ego_cuts ? slow : fast);
    const double gap = rng.uniform(12.0, 28.0);
    const double change = rng.uniform(0.3, 3.0);
    if (ego_cuts) {
        ego.change_dir = 1;
        ego.change_time = change;
        ego.force_time = 0.0;
        b.sim.experts.push_back(ego);
        b.sim.experts.push_back(make_expert(next++, 0, 1, ego_x - gap, ls[1], fast, fast));
    } else {
        b.sim.experts.push_back(ego);
        Expert cutter = make_expert(next++, 0, 0, ego_x + gap, ls[0], slow, slow);
        cutter.change_dir = 1;
        cutter.change_time = change;
        cutter.force_time = 0.0;
        b.sim.experts.push_back(cutter);
        b.sim.experts.push_back(make_expert(next++, 0, 1, ego_x - rng.uniform(25.0, 45.0), ls[1], fast, fast));
    }
    for (double x : spread(rng, rng.integer(0, 2), ego_x + 60.0, ego_x + 160.0, 25.0, {}))
        b.sim.experts.push_back(make_expert(next++, 0, 0, x, ls[0], slow, limit * rng.uniform(0.7, 0.9)));
    b.route = {ls[ego_cuts ? 0 : 1].id};
    if (ego_cuts) b.route.push_back(ls[1].id);
    return b;
}

} // namespace

std::string to_string(SuiteKind k)
{
    switch (k) {
    case SuiteKind::car_following: return "car_following";
    case SuiteKind::lane_change: return "lane_change";
    case SuiteKind::merge: return "merge";
    case SuiteKind::intersection_lite: return "intersection_lite";
    case SuiteKind::cut_in: return "cut_in";
    }
    return "unknown";
}

SuiteKind suite_from_string(const std::string& s)
{
    for (SuiteKind k : {SuiteKind::car_following, SuiteKind::lane_change, SuiteKind::merge, SuiteKind::intersection_lite,
                        SuiteKind::cut_in})
        if (to_string(k) == s) return k;
    throw Error("unknown suite kind '" + s + "'");
}

Scenario generate_scenario(SuiteKind kind, int index, std::uint64_t seed)
{
    if (index < 0) throw Error("scenario index must be non-negative");
    char id[96];
    std::snprintf(id, sizeof id, "%s_%03d", to_string(kind).c_str(), index);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(mix({seed, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(index),
                     static_cast<std::uint64_t>(attempt)}));
        Built b;
        switch (kind) {
        case SuiteKind::car_following: b = build_car_following(rng); break;
        case SuiteKind::lane_change: b = build_lane_change(rng); break;
        case SuiteKind::merge: b = build_merge(rng); break;
        case SuiteKind::intersection_lite: b = build_intersection(rng); break;
        case SuiteKind::cut_in: b = build_cut_in(rng); break;
        }
        b.sim.run(kDefaultHorizonSteps);
        Scenario scn = b.sim.to_scenario(id, to_string(kind), b.route, kDefaultHorizonSteps);
        if (!b.sim.valid(*scn.lane_graph)) continue;
        if (kind == SuiteKind::lane_change) {
            const Pose2D end = scn.logged(kEgoId)->back().pose;
            const int target = b.route.back();
            if (!point_in_polygon(end.position(), scn.lane_graph->lane(target).polygon())) continue;
        }
        validate_scenario(scn);
        return scn;
    }
    throw Error("could not generate a collision-free " + to_string(kind) + " scenario for index " +
                std::to_string(index));
}

std::vector<Scenario> generate_suite(SuiteKind kind, int n, std::uint64_t seed)
{
    if (n < 1) throw Error("suite size must be at least 1");
    std::vector<Scenario> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(generate_scenario(kind, i, seed));
    return out;
}

Scenario cut_in_scenario()
{
    ExpertSim sim;
    Road r = straight_road(2, 14.0, 600.0, 0.0);
    sim.roads.push_back(r);
    Expert ego = make_expert(kEgoId, 0, 0, 100.0, r.lanes[0], 11.0, 11.0);
    ego.change_dir = 1;
    ego.change_time = 0.5;
    ego.force_time = 0.0;
    sim.experts.push_back(ego);
    sim.experts.push_back(make_expert(kCutInFollowerId, 0, 1, 100.0 - 18.5, r.lanes[1], 14.0, 14.0));
    sim.run(kDefaultHorizonSteps);
    Scenario scn = sim.to_scenario("cut_in", "cut_in", {1, 2}, kDefaultHorizonSteps);
    validate_scenario(scn);
    return scn;
}

std::string to_string(DensityLevel d)
{
    switch (d) {
    case DensityLevel::low: return "low";
    case DensityLevel::mid: return "mid";
    case DensityLevel::high: return "high";
    }
    return "unknown";
}

DensityLevel density_from_string(const std::string& s)
{
    for (DensityLevel d : {DensityLevel::low, DensityLevel::mid, DensityLevel::high})
        if (to_string(d) == s) return d;
    throw Error("unknown density level '" + s + "'");
}

namespace {

struct Window
{
    double lo = 0.0;
    double hi = 0.0;
};

Window density_window(const Scenario& scn, const Lane& lane)
{
    const double s = lane.centerline().project(scn.ego.pose.position()).arc_length;
    return {std::max(0.0, s - kDensityWindowBehind), std::min(lane.length(), s + kDensityWindowAhead)};
}

std::vector<const AgentState*> vehicles_in_window(const Scenario& scn, const Lane& lane, Window w)
{
    std::vector<const AgentState*> out;
    auto consider = [&](const AgentState& a) {
        if (!point_in_polygon(a.pose.position(), lane.polygon())) return;
        const double s = lane.centerline().project(a.pose.position()).arc_length;
        if (s >= w.lo && s <= w.hi) out.push_back(&a);
    };
    consider(scn.ego);
    for (const auto& a : scn.agents) consider(a);
    return out;
}

double window_gap(double window, double lengths, std::size_t n)
{
    return (window - lengths) / static_cast<double>(n + 1);
}

constexpr double kInsertClearance = 3.0; // bumper gap to vehicles in the same lane
constexpr double kSideClearance = 0.5;
constexpr double kEgoClearance = 8.0;
constexpr int kPlacementAttempts = 1000;

} // namespace

double mean_bumper_gap(const Scenario& scn, int lane_id)
{
    const Lane& lane = scn.lane_graph->lane(lane_id);
    const Window w = density_window(scn, lane);
    double lengths = 0.0;
    const auto vs = vehicles_in_window(scn, lane, w);
    for (const AgentState* a : vs) lengths += a->length;
    return window_gap(w.hi - w.lo, lengths, vs.size());
}

Scenario augment_density(const Scenario& scn, DensityLevel level, std::uint64_t seed)
{
    validate_scenario(scn);
    Scenario out = scn;
    std::vector<double> stages{kLowDensityGap};
    if (level != DensityLevel::low) stages.push_back(kHighDensityGap);
    if (level == DensityLevel::high) stages.push_back(10.0);

    int next_id = kEgoId;
    for (const auto& a : out.agents) next_id = std::max(next_id, a.id);
    ++next_id;

    std::map<int, Rng> streams;
    for (const auto& [id, lane] : out.lane_graph->lanes()) streams.emplace(id, Rng(mix({seed, static_cast<std::uint64_t>(id)})));

    constexpr double kLength = 4.5;
    constexpr double kWidth = 2.0;
    for (double threshold : stages) {
        for (const auto& [id, lane] : out.lane_graph->lanes()) {
            Rng& rng = streams.at(id);
            const Window w = density_window(out, lane);
            if (w.hi - w.lo < 2.0 * kLength) continue;
            while (true) {
                const auto vs = vehicles_in_window(out, lane, w);
                double lengths = kLength;
                for (const AgentState* a : vs) lengths += a->length;
                if (window_gap(w.hi - w.lo, lengths, vs.size() + 1) < threshold) break;

                bool placed = false;
                for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
                    const double s = rng.uniform(w.lo + 0.5 * kLength, w.hi - 0.5 * kLength);
                    const double frac = rng.uniform(0.6, 0.9);
                    AgentState a;
                    a.id = next_id;
                    a.pose = Pose2D(lane.centerline().point_at(s), lane.centerline().heading_at(s));
                    a.length = kLength;
                    a.width = kWidth;
                    const OrientedBox box = a.footprint();
                    if (box_signed_distance(box, out.ego.footprint()) < kEgoClearance) continue;
                    bool clear = true;
                    double front_gap = kInf;
                    for (const auto& o : out.agents) {
                        const double d = box_signed_distance(box, o.footprint());
                        const bool same_lane = point_in_polygon(o.pose.position(), lane.polygon());
                        if (d < (same_lane ? kInsertClearance : kSideClearance)) {
                            clear = false;
                            break;
                        }
                        if (same_lane && lane.centerline().project(o.pose.position()).arc_length > s)
                            front_gap = std::min(front_gap, d);
                    }
                    if (!clear) continue;
                    a.speed = std::min(frac * lane.speed_limit(), std::max(0.0, (front_gap - 2.0) / 1.5));
                    out.agents.push_back(a);
                    ++next_id;
                    placed = true;
                }
                if (!placed)
                    throw Error("augment_density: cannot place a vehicle on lane " + std::to_string(id) +
                                " without overlap after " + std::to_string(kPlacementAttempts) + " attempts");
            }
        }
    }
    out.tag = scn.tag + ":" + to_string(level);
    validate_scenario(out);
    return out;
}

} // namespace cloop
