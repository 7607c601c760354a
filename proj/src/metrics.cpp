#include "cloop/metrics.hpp"

#include "cloop/error.hpp"
#include "cloop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace cloop {

namespace {

// Sutherland-Hodgman clip of a convex polygon by a CCW convex clip polygon.
Polygon clip_convex(const Polygon& subject, std::span<const Vec2> clip)
{
    Polygon out = subject;
    for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
        const Vec2 a = clip[i];
        const Vec2 b = clip[(i + 1) % clip.size()];
        const Vec2 e = b - a;
        Polygon in = std::move(out);
        out.clear();
        for (std::size_t j = 0; j < in.size(); ++j) {
            const Vec2 p = in[j];
            const Vec2 q = in[(j + 1) % in.size()];
            const double sp = cross(e, p - a);
            const double sq = cross(e, q - a);
            if (sp >= 0.0) out.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0)) {
                const double t = sp / (sp - sq);
                out.push_back(p + (q - p) * t);
            }
        }
    }
    return out;
}

Vec2 polygon_centroid(const Polygon& poly)
{
    double area2 = 0.0;
    Vec2 c;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 p = poly[i];
        const Vec2 q = poly[(i + 1) % poly.size()];
        const double w = cross(p, q);
        area2 += w;
        c = c + (p + q) * w;
    }
    if (std::abs(area2) > 1e-12) return c * (1.0 / (3.0 * area2));
    Vec2 mean;
    for (const Vec2& p : poly) mean = mean + p;
    return mean * (1.0 / static_cast<double>(poly.size()));
}

Vec2 contact_centroid(const AgentState& ego, const AgentState& other)
{
    const OrientedBox eb = ego.footprint();
    const OrientedBox ob = other.footprint();
    const Polygon region = clip_convex(Polygon(ob.begin(), ob.end()), eb);
    const Vec2 world = region.empty() ? (ego.pose.position() + other.pose.position()) * 0.5 : polygon_centroid(region);
    return to_local(ego.pose, world);
}

kernels::MovingBox moving(const AgentState& a)
{
    return {a.pose, a.velocity(), a.length, a.width};
}

// Forward difference at the ends, central in the interior.
std::vector<double> derivative(std::span<const double> f, double dt)
{
    const std::size_t n = f.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    d[0] = (f[1] - f[0]) / dt;
    d[n - 1] = (f[n - 1] - f[n - 2]) / dt;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
    return d;
}

} // namespace

void MetricWeights::validate() const
{
    for (double w : {ttc, progress, speed_limit, comfort})
        if (!(w > 0.0) || !std::isfinite(w)) throw Error("metric weights must be positive");
}

ClosedLoopScore compose_cls(const SoftMetrics& soft, const HardMultipliers& hard, const MetricWeights& weights)
{
    weights.validate();
    ClosedLoopScore s;
    s.soft = soft;
    s.hard = hard;
    if (hard.at_fault_collision || hard.drivable_area_violation) {
        s.composite = 0.0;
        return s;
    }
    const double num = weights.ttc * soft.ttc + weights.progress * soft.progress +
                       weights.speed_limit * soft.speed_limit + weights.comfort * soft.comfort;
    const double den = weights.ttc + weights.progress + weights.speed_limit + weights.comfort;
    s.composite = 100.0 * num / den;
    return s;
}

std::vector<CollisionEvent> detect_collisions(const RolloutLog& log)
{
    std::vector<CollisionEvent> events;
    std::vector<int> seen;
    for (std::size_t k = 0; k < log.snapshots.size(); ++k) {
        const WorldSnapshot& s = log.snapshots[k];
        const OrientedBox eb = s.ego.footprint();
        const double er = 0.5 * std::hypot(s.ego.length, s.ego.width);
        for (const AgentState& a : s.agents) {
            if (std::find(seen.begin(), seen.end(), a.id) != seen.end()) continue;
            const double reach = er + 0.5 * std::hypot(a.length, a.width);
            if (distance(s.ego.pose.position(), a.pose.position()) > reach) continue;
            if (!obb_overlap(eb, a.footprint())) continue;
            seen.push_back(a.id);
            events.push_back({static_cast<int>(k), a.id, contact_centroid(s.ego, a)});
        }
    }
    return events;
}

bool classify_at_fault(const CollisionEvent& event, const RolloutLog& log, const Route& route,
                       const LaneGraph& graph, const MetricConfig& cfg)
{
    const AgentState& ego = log.snapshots.at(static_cast<std::size_t>(event.step)).ego;
    if (!route.in_corridor(ego.pose.position(), graph)) return true;
    return event.contact_centroid.x >= 0.0 && ego.speed >= cfg.at_fault_min_speed;
}

bool drivable_area_compliance(const RolloutLog& log, const LaneGraph& graph, const MetricConfig& cfg)
{
    constexpr double kInsideTolerance = 1e-6;
    int outside_steps = 0;
    for (const WorldSnapshot& s : log.snapshots) {
        double worst = 0.0;
        for (const Vec2& v : s.ego.footprint()) worst = std::max(worst, graph.distance_outside(v));
        if (worst > cfg.max_offroad_distance) return true;
        if (worst > kInsideTolerance) ++outside_steps;
    }
    return outside_steps * log.dt > cfg.max_offroad_time + 1e-9;
}

TtcResult time_to_collision_score(const RolloutLog& log, const MetricConfig& cfg)
{
    TtcResult r;
    std::vector<kernels::MovingBox> others;
    for (std::size_t k = 0; k < log.snapshots.size(); ++k) {
        const WorldSnapshot& s = log.snapshots[k];
        const kernels::MovingBox ego = moving(s.ego);
        const double ego_reach = s.ego.speed * cfg.ttc_horizon + 0.5 * std::hypot(s.ego.length, s.ego.width);
        others.clear();
        for (const AgentState& a : s.agents) {
            const double reach = ego_reach + a.speed * cfg.ttc_horizon + 0.5 * std::hypot(a.length, a.width);
            if (distance(s.ego.pose.position(), a.pose.position()) <= reach) others.push_back(moving(a));
        }
        if (others.empty()) continue;
        const double t = kernels::first_overlap_time_omp(ego, others, cfg.ttc_horizon, cfg.ttc_step);
        if (t < r.min_ttc) {
            r.min_ttc = t;
            r.min_step = static_cast<int>(k);
        }
    }
    r.score = r.min_ttc < cfg.ttc_threshold ? 0.0 : 1.0;
    return r;
}

double ego_progress(const RolloutLog& log, const Route& route)
{
    if (log.snapshots.empty()) return 0.0;
    const Polyline& path = route.path();
    const double s0 = path.project(log.snapshots.front().ego.pose.position()).arc_length;
    double best = s0;
    for (const WorldSnapshot& s : log.snapshots) best = std::max(best, path.project(s.ego.pose.position()).arc_length);
    return best - s0;
}

double progress_score(const RolloutLog& log, const Route& route, double reference)
{
    if (reference < kMinReferenceProgress) return 1.0;
    return std::clamp(ego_progress(log, route) / reference, 0.0, 1.0);
}

double reference_progress(const Scenario& scn)
{
    const Polyline& path = scn.route.path();
    const double s0 = path.project(scn.ego.pose.position()).arc_length;
    if (const Trajectory* log = scn.logged(kEgoId)) {
        double best = s0;
        const std::size_t n = std::min(log->size(), static_cast<std::size_t>(scn.horizon_steps) + 1);
        for (std::size_t k = 0; k < n; ++k) best = std::max(best, path.project((*log)[k].pose.position()).arc_length);
        return best - s0;
    }
    double limit = 0.0;
    for (int id : scn.route.lane_ids()) limit = std::max(limit, scn.lane_graph->lane(id).speed_limit());
    return std::min(scn.route.total_length() - s0, limit * scn.horizon_seconds());
}

ComfortResult comfort_score(const RolloutLog& log, const ComfortThresholds& th)
{
    ComfortResult r;
    const std::size_t n = log.snapshots.size();
    if (n < 3) return r;
    std::vector<double> x(n), y(n), h(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Pose2D& p = log.snapshots[k].ego.pose;
        x[k] = p.x;
        y[k] = p.y;
        h[k] = k == 0 ? p.heading() : h[k - 1] + normalize_angle(p.heading() - log.snapshots[k - 1].ego.pose.heading());
    }
    const double dt = log.dt;
    const auto vx = derivative(x, dt);
    const auto vy = derivative(y, dt);
    const auto ax = derivative(vx, dt);
    const auto ay = derivative(vy, dt);
    const auto jx = derivative(ax, dt);
    const auto jy = derivative(ay, dt);
    const auto yaw_rate = derivative(h, dt);

    r.min_lon_accel = std::numeric_limits<double>::infinity();
    r.max_lon_accel = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double c = std::cos(h[k]);
        const double s = std::sin(h[k]);
        const double lon = ax[k] * c + ay[k] * s;
        const double lat = -ax[k] * s + ay[k] * c;
        r.min_lon_accel = std::min(r.min_lon_accel, lon);
        r.max_lon_accel = std::max(r.max_lon_accel, lon);
        r.max_abs_lat_accel = std::max(r.max_abs_lat_accel, std::abs(lat));
        r.max_jerk = std::max(r.max_jerk, std::hypot(jx[k], jy[k]));
        r.max_abs_yaw_rate = std::max(r.max_abs_yaw_rate, std::abs(yaw_rate[k]));
    }
    const bool ok = r.min_lon_accel >= th.min_lon_accel && r.max_lon_accel <= th.max_lon_accel &&
                    r.max_abs_lat_accel <= th.max_lat_accel && r.max_jerk <= th.max_jerk &&
                    r.max_abs_yaw_rate <= th.max_yaw_rate;
    r.score = ok ? 1.0 : 0.0;
    return r;
}

double speed_limit_score(const RolloutLog& log, const LaneGraph& graph)
{
    std::optional<int> lane;
    double sum = 0.0;
    int count = 0;
    for (const WorldSnapshot& s : log.snapshots) {
        if (auto pos = graph.locate(s.ego.pose, lane)) lane = pos->lane_id;
        if (!lane) continue;
        const double limit = graph.lane(*lane).speed_limit();
        sum += std::max(0.0, s.ego.speed - limit) / limit;
        ++count;
    }
    if (count == 0) return 1.0;
    return 1.0 - std::clamp(sum / count, 0.0, 1.0);
}

double ade(std::span<const std::vector<Vec2>> simulated, std::span<const std::vector<Vec2>> logged, int horizon_steps)
{
    if (simulated.size() != logged.size()) throw Error("ade: agent count mismatch");
    if (horizon_steps < 1) throw Error("ade: horizon must be positive");
    if (simulated.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < simulated.size(); ++i) {
        const auto h = static_cast<std::size_t>(horizon_steps);
        if (simulated[i].size() <= h || logged[i].size() <= h) throw Error("ade: trajectory shorter than horizon");
        double e = 0.0;
        for (std::size_t k = 1; k <= h; ++k) e += distance(simulated[i][k], logged[i][k]);
        total += e / horizon_steps;
    }
    return total / static_cast<double>(simulated.size());
}

std::vector<double> histogram(std::span<const double> values, double lo, double hi, int bins)
{
    if (bins < 1 || !(hi > lo)) throw Error("histogram: invalid range");
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        const int b = std::clamp(static_cast<int>(std::floor((v - lo) / (hi - lo) * bins)), 0, bins - 1);
        h[static_cast<std::size_t>(b)] += 1.0;
    }
    return h;
}

double js_divergence(std::span<const double> p, std::span<const double> q)
{
    if (p.size() != q.size()) throw Error("js_divergence: size mismatch");
    const double sp = std::accumulate(p.begin(), p.end(), 0.0);
    const double sq = std::accumulate(q.begin(), q.end(), 0.0);
    if (sp <= 0.0 && sq <= 0.0) return 0.0;
    if (sp <= 0.0 || sq <= 0.0) return 1.0;
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i] / sp;
        const double b = q[i] / sq;
        const double m = 0.5 * (a + b);
        if (a > 0.0) d += 0.5 * a * std::log2(a / m);
        if (b > 0.0) d += 0.5 * b * std::log2(b / m);
    }
    return std::clamp(d, 0.0, 1.0);
}

RealismReport realism_report(const RolloutLog& log, const Scenario& scn)
{
    RealismReport r;
    const std::size_t steps = log.snapshots.size();
    if (steps < 2 || scn.agents.empty()) return r;

    std::vector<std::vector<Vec2>> sim_pos, log_pos;
    std::vector<double> sim_speed, log_speed, sim_acc, log_acc, sim_nn, log_nn;
    const Trajectory* ego_log = scn.logged(kEgoId);
    int inside = 0;
    int total = 0;

    for (std::size_t i = 0; i < scn.agents.size(); ++i) {
        const int id = scn.agents[i].id;
        const Trajectory* lg = scn.logged(id);
        if (!lg || lg->size() < steps) throw Error("realism: agent " + std::to_string(id) + " has no logged future");
        std::vector<Vec2> sp, lp;
        std::vector<double> sv, lv;
        for (std::size_t k = 0; k < steps; ++k) {
            const AgentState& a = log.snapshots[k].agents.at(i);
            sp.push_back(a.pose.position());
            lp.push_back((*lg)[k].pose.position());
            sv.push_back(a.speed);
            lv.push_back((*lg)[k].speed);
            ++total;
            if (scn.lane_graph->in_drivable_area(a.pose.position())) ++inside;
        }
        const auto sa = derivative(sv, log.dt);
        const auto la = derivative(lv, log.dt);
        sim_speed.insert(sim_speed.end(), sv.begin(), sv.end());
        log_speed.insert(log_speed.end(), lv.begin(), lv.end());
        sim_acc.insert(sim_acc.end(), sa.begin(), sa.end());
        log_acc.insert(log_acc.end(), la.begin(), la.end());
        sim_pos.push_back(std::move(sp));
        log_pos.push_back(std::move(lp));
    }

    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t i = 0; i < scn.agents.size(); ++i) {
            double sn = distance(sim_pos[i][k], log.snapshots[k].ego.pose.position());
            double ln = ego_log && ego_log->size() > k ? distance(log_pos[i][k], (*ego_log)[k].pose.position())
                                                       : std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < scn.agents.size(); ++j) {
                if (j == i) continue;
                sn = std::min(sn, distance(sim_pos[i][k], sim_pos[j][k]));
                ln = std::min(ln, distance(log_pos[i][k], log_pos[j][k]));
            }
            sim_nn.push_back(sn);
            log_nn.push_back(ln);
        }
    }

    const int horizon = std::min<int>(kAdeHorizonSteps, static_cast<int>(steps) - 1);
    r.ade = ade(sim_pos, log_pos, horizon);
    const double js_speed = js_divergence(histogram(sim_speed, 0.0, 30.0), histogram(log_speed, 0.0, 30.0));
    const double js_acc = js_divergence(histogram(sim_acc, -6.0, 6.0), histogram(log_acc, -6.0, 6.0));
    r.kinematic = 1.0 - 0.5 * (js_speed + js_acc);
    r.interaction = 1.0 - js_divergence(histogram(sim_nn, 0.0, 50.0), histogram(log_nn, 0.0, 50.0));
    r.map = static_cast<double>(inside) / total;
    r.composite = (r.kinematic + r.interaction + r.map) / 3.0;
    return r;
}

ScenarioEvaluation evaluate_rollout(const RolloutLog& log, const Scenario& scn, const MetricConfig& cfg)
{
    ScenarioEvaluation ev;
    ev.scenario_id = scn.id;
    ev.tag = scn.tag;
    ev.planner = log.planner;
    ev.background = log.background;
    ev.termination = log.termination;
    ev.error = log.error;
    ev.score.background = log.background;
    ev.reference_progress_m = reference_progress(scn);
    ev.progress_m = ego_progress(log, scn.route);

    const auto events = detect_collisions(log);
    ev.collisions = static_cast<int>(events.size());
    HardMultipliers hard;
    for (const auto& e : events)
        if (classify_at_fault(e, log, scn.route, *scn.lane_graph, cfg)) hard.at_fault_collision = true;
    hard.drivable_area_violation = drivable_area_compliance(log, *scn.lane_graph, cfg);

    const TtcResult ttc = time_to_collision_score(log, cfg);
    ev.min_ttc = ttc.min_ttc;
    SoftMetrics soft;
    soft.ttc = ttc.score;
    soft.progress = progress_score(log, scn.route, ev.reference_progress_m);
    soft.comfort = comfort_score(log, cfg.comfort).score;
    soft.speed_limit = speed_limit_score(log, *scn.lane_graph);

    ev.score = compose_cls(soft, hard, cfg.weights);
    ev.score.background = log.background;
    if (log.termination == Termination::planner_error) ev.score.composite = 0.0;

    bool has_logs = true;
    for (const auto& a : scn.agents)
        if (!scn.logged(a.id) || scn.logged(a.id)->size() < log.snapshots.size()) has_logs = false;
    if (has_logs && log.snapshots.size() >= 2) ev.realism = realism_report(log, scn);
    return ev;
}

BenchmarkReport aggregate_benchmark(std::vector<ScenarioEvaluation> records)
{
    BenchmarkReport rep;
    std::sort(records.begin(), records.end(), [](const ScenarioEvaluation& a, const ScenarioEvaluation& b) {
        return std::tie(a.scenario_id, a.planner, a.background) < std::tie(b.scenario_id, b.planner, b.background);
    });
    auto add = [](GroupScore& g, double v) {
        ++g.count;
        g.mean += (v - g.mean) / g.count;
    };
    for (const auto& r : records) {
        if (r.termination == Termination::internal_error) {
            ++rep.internal_errors;
            continue;
        }
        add(rep.by_planner[r.planner][r.background], r.score.composite);
        add(rep.by_planner_tag[r.planner][r.tag][r.background], r.score.composite);
        if (r.termination == Termination::planner_error) ++rep.planner_errors;
    }
    rep.records = std::move(records);
    return rep;
}

std::optional<double> score_delta(const BenchmarkReport& report, const std::string& planner, BackgroundKind a,
                                  BackgroundKind b, const std::string& tag)
{
    const std::map<BackgroundKind, GroupScore>* groups = nullptr;
    if (tag.empty()) {
        auto it = report.by_planner.find(planner);
        if (it == report.by_planner.end()) return std::nullopt;
        groups = &it->second;
    } else {
        auto it = report.by_planner_tag.find(planner);
        if (it == report.by_planner_tag.end()) return std::nullopt;
        auto jt = it->second.find(tag);
        if (jt == it->second.end()) return std::nullopt;
        groups = &jt->second;
    }
    auto ia = groups->find(a);
    auto ib = groups->find(b);
    if (ia == groups->end() || ib == groups->end()) return std::nullopt;
    return ib->second.mean - ia->second.mean;
}

} // namespace cloop
