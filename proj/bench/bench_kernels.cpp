#include "cloop/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace cloop;
using namespace cloop::kernels;

namespace {

struct KMeansData
{
    std::vector<Point3> points;
    std::vector<Point3> centroids;
};

KMeansData kmeans_data(std::size_t n, std::size_t k)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 4.0);
    KMeansData d{std::vector<Point3>(n), std::vector<Point3>(k)};
    for (auto& p : d.points) p = {g(rng), g(rng), g(rng)};
    for (auto& c : d.centroids) c = {g(rng), g(rng), g(rng)};
    return d;
}

template <double (*Assign)(std::span<const Point3>, std::span<const Point3>, std::span<int>)>
void bm_assign(benchmark::State& state)
{
    const auto d = kmeans_data(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    std::vector<int> labels(d.points.size());
    for (auto _ : state) benchmark::DoNotOptimize(Assign(d.points, d.centroids, labels));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

std::pair<MovingBox, std::vector<MovingBox>> traffic(std::size_t n)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MovingBox ego{Pose2D(0, 0, 0), {12, 0}, 4.5, 2.0};
    std::vector<MovingBox> others;
    for (std::size_t i = 0; i < n; ++i)
        others.push_back({Pose2D(200 * u(rng) - 50, 14 * u(rng) - 7, 0.2 * u(rng) - 0.1),
                          {6 + 8 * u(rng), 0}, 4.5, 2.0});
    return {ego, others};
}

template <double (*Ttc)(const MovingBox&, std::span<const MovingBox>, double, double, int*)>
void bm_ttc(benchmark::State& state)
{
    const auto [ego, others] = traffic(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Ttc(ego, others, 3.0, 0.1, nullptr));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(bm_assign<assign_nearest_serial>)->Args({20000, 64})->Args({100000, 128});
BENCHMARK(bm_assign<assign_nearest_omp>)->Args({20000, 64})->Args({100000, 128});
BENCHMARK(bm_ttc<first_overlap_time_serial>)->Arg(8)->Arg(64)->Arg(512);
BENCHMARK(bm_ttc<first_overlap_time_omp>)->Arg(8)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
