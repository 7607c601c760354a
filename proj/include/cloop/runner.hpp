#pragma once

#include "cloop/background.hpp"
#include "cloop/engine.hpp"
#include "cloop/generators.hpp"
#include "cloop/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cloop {

struct GeneratorSpec
{
    SuiteKind kind = SuiteKind::car_following;
    int count = 1;
    std::uint64_t seed = 0;
    /// Empty: base scenarios. Otherwise one augmented copy per level.
    std::vector<DensityLevel> densities;
};

struct BenchmarkConfig
{
    std::vector<std::string> scenario_paths; // files or directories of *.json
    std::vector<GeneratorSpec> generators;
    std::vector<std::string> planners{"centerline"};
    IdmParams planner_idm;
    std::vector<BackgroundKind> backgrounds;
    std::uint64_t seed = 0;
    TrackerMode tracker = TrackerMode::perfect;
    MetricConfig metrics;
    IdmBackgroundConfig idm_background;
    std::string model_path;
    std::string vocab_path;
    DecodeOptions decode;
    std::string output_dir = "bench_out";
    int parallelism = 1;
    bool svg = false;

    void validate() const;
};

/// Parses the JSON config. Paths are resolved relative to `base_dir`.
BenchmarkConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {},
                             const std::string& source = "<config>");
BenchmarkConfig load_config(const std::filesystem::path& path);

/// Scenarios from paths and generators, sorted by id; ids must be unique.
std::vector<Scenario> resolve_scenarios(const BenchmarkConfig& cfg);

/// Loads the model and vocabulary when a learned background is requested.
BackgroundResources load_resources(const BenchmarkConfig& cfg);

/// Seed of one rollout, derived from the run seed and the job identity.
std::uint64_t job_seed(std::uint64_t seed, const std::string& scenario_id, const std::string& planner,
                       BackgroundKind background);

struct JobResult
{
    ScenarioEvaluation evaluation;
    std::optional<RolloutLog> log; // kept only when requested
};

/// One rollout plus evaluation. Internal failures are caught and recorded as
/// Termination::internal_error.
JobResult run_job(const Scenario& scn, const std::string& planner, BackgroundKind background,
                  const BenchmarkConfig& cfg, const BackgroundResources& resources, bool keep_log = false);

/// Every scenario x planner x background, in parallel when cfg.parallelism > 1.
/// Writes report.json, report.csv, summary.csv, records/ and optional svg/.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const std::vector<Scenario>& scenarios,
                              const BackgroundResources& resources, bool write_outputs = true);

std::string evaluation_to_json(const ScenarioEvaluation& ev);
ScenarioEvaluation evaluation_from_json(const std::string& text);

std::string report_to_json(const BenchmarkReport& report);
std::string report_to_csv(const BenchmarkReport& report);
/// Aggregate table: planner, tag, CLS-NR, CLS-R, CLS-SR and the deltas.
std::string summary_table(const BenchmarkReport& report);

void write_report(const BenchmarkReport& report, const std::filesystem::path& dir);
/// Re-aggregates every records/*.json below `dir`.
BenchmarkReport read_records(const std::filesystem::path& dir);

std::string record_name(const ScenarioEvaluation& ev);

/// Top-down snapshots at 1 s intervals: lanes, centerlines, footprints.
std::vector<std::string> render_svg_series(const RolloutLog& log, const Scenario& scn);
void write_svg_series(const RolloutLog& log, const Scenario& scn, const std::filesystem::path& dir);

} // namespace cloop
