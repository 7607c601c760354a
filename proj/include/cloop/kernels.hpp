#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version used by the
// library and a serial reference kept for tests and benchmarks; both must
// produce bit-identical results.

#include "cloop/geometry.hpp"

#include <array>
#include <span>
#include <vector>

namespace cloop::kernels {

using Point3 = std::array<double, 3>;

inline double squared_distance(const Point3& a, const Point3& b)
{
    const double d0 = a[0] - b[0];
    const double d1 = a[1] - b[1];
    const double d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

/// Nearest-centroid assignment; ties go to the lowest centroid index.
/// Returns the summed squared distance.
double assign_nearest_serial(std::span<const Point3> points, std::span<const Point3> centroids,
                             std::span<int> labels);
double assign_nearest_omp(std::span<const Point3> points, std::span<const Point3> centroids, std::span<int> labels);

/// Constant-velocity body moving on a footprint.
struct MovingBox
{
    Pose2D pose;
    Vec2 velocity;
    double length = 0.0;
    double width = 0.0;
};

/// Earliest time in {0, step, 2*step, ..., horizon} at which the ego box
/// overlaps any of the others under constant-velocity projection; +inf if
/// none. Index of the hit agent written to `hit` (-1 if none).
double first_overlap_time_serial(const MovingBox& ego, std::span<const MovingBox> others, double horizon,
                                 double step, int* hit = nullptr);
double first_overlap_time_omp(const MovingBox& ego, std::span<const MovingBox> others, double horizon,
                              double step, int* hit = nullptr);

} // namespace cloop::kernels
