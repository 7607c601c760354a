#include "cloop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cloop::kernels {

namespace {

int nearest_index(const Point3& p, std::span<const Point3> centroids, double* best_out)
{
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = squared_distance(p, centroids[j]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    *best_out = best_d;
    return best;
}

double box_first_hit(const MovingBox& ego, const MovingBox& other, double horizon, double step)
{
    const int n = static_cast<int>(std::floor(horizon / step + 1e-9));
    // Circumscribed circles: skip the pair, or single samples, that cannot touch.
    const double reach = 0.5 * (std::hypot(ego.length, ego.width) + std::hypot(other.length, other.width)) + 1e-9;
    const Vec2 rel = other.pose.position() - ego.pose.position();
    const Vec2 rel_v = other.velocity - ego.velocity;
    const double vv = dot(rel_v, rel_v);
    const double t_close = vv > 0.0 ? std::clamp(-dot(rel, rel_v) / vv, 0.0, n * step) : 0.0;
    if ((rel + rel_v * t_close).norm() > reach) return std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
        const double t = i * step;
        if ((rel + rel_v * t).norm() > reach) continue;
        const Pose2D ep(ego.pose.position() + ego.velocity * t, ego.pose.heading());
        const Pose2D op(other.pose.position() + other.velocity * t, other.pose.heading());
        if (obb_overlap(make_box(ep, ego.length, ego.width), make_box(op, other.length, other.width))) return t;
    }
    return std::numeric_limits<double>::infinity();
}

double reduce_first(std::span<const double> times, int* hit)
{
    double best = std::numeric_limits<double>::infinity();
    int idx = -1;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < best) {
            best = times[i];
            idx = static_cast<int>(i);
        }
    }
    if (hit) *hit = idx;
    return best;
}

} // namespace

double assign_nearest_serial(std::span<const Point3> points, std::span<const Point3> centroids, std::span<int> labels)
{
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = 0.0;
        labels[i] = nearest_index(points[i], centroids, &d);
        total += d;
    }
    return total;
}

double assign_nearest_omp(std::span<const Point3> points, std::span<const Point3> centroids, std::span<int> labels)
{
    const auto n = static_cast<std::ptrdiff_t>(points.size());
    std::vector<double> dist(points.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) labels[i] = nearest_index(points[i], centroids, &dist[i]);
    // Serial sum keeps the total bit-identical to the reference.
    double total = 0.0;
    for (double d : dist) total += d;
    return total;
}

double first_overlap_time_serial(const MovingBox& ego, std::span<const MovingBox> others, double horizon,
                                 double step, int* hit)
{
    std::vector<double> times(others.size());
    for (std::size_t i = 0; i < others.size(); ++i) times[i] = box_first_hit(ego, others[i], horizon, step);
    return reduce_first(times, hit);
}

double first_overlap_time_omp(const MovingBox& ego, std::span<const MovingBox> others, double horizon, double step,
                              int* hit)
{
    const auto n = static_cast<std::ptrdiff_t>(others.size());
    std::vector<double> times(others.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) times[i] = box_first_hit(ego, others[i], horizon, step);
    return reduce_first(times, hit);
}

} // namespace cloop::kernels
