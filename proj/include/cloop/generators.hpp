#pragma once

#include "cloop/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cloop {

/// cut_in: a vehicle merges close ahead of a faster one in the adjacent lane,
/// which yields. Used to give the learned policy examples of reacting.
enum class SuiteKind { car_following, lane_change, merge, intersection_lite, cut_in };

std::string to_string(SuiteKind k);
SuiteKind suite_from_string(const std::string& s);

/// One synthetic scenario with logged futures produced by scripted experts
/// (IDM following, quintic lane changes, yielding to vehicles that intrude
/// into their lane). Scenario i of a suite depends only on (kind, i, seed).
Scenario generate_scenario(SuiteKind kind, int index, std::uint64_t seed);
std::vector<Scenario> generate_suite(SuiteKind kind, int n, std::uint64_t seed);

/// Two-lane scene where the ego (replaying its log) changes into the left
/// lane ahead of a faster vehicle (agent id 1) that drives at the speed limit.
Scenario cut_in_scenario();
constexpr int kCutInFollowerId = 1;

enum class DensityLevel { low, mid, high };

std::string to_string(DensityLevel d);
DensityLevel density_from_string(const std::string& s);

/// Gap statistics are taken over a window of the lane around the ego's
/// projection: [s_ego - 60 m, s_ego + 140 m], clipped to the lane.
constexpr double kDensityWindowBehind = 60.0;
constexpr double kDensityWindowAhead = 140.0;
constexpr double kLowDensityGap = 40.0;
constexpr double kHighDensityGap = 15.0;

/// (window length - summed vehicle lengths) / (vehicles in window + 1).
double mean_bumper_gap(const Scenario& scn, int lane_id);

/// Inserts vehicles on every lane at seeded positions until each lane's mean
/// bumper gap reaches the level's band. Levels nest: for the same seed,
/// high contains every vehicle of mid, and mid every vehicle of low. Map,
/// route and ego are untouched; inserted vehicles carry no logged future.
Scenario augment_density(const Scenario& scn, DensityLevel level, std::uint64_t seed);

} // namespace cloop
