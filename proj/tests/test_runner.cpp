#include "cloop/error.hpp"
#include "cloop/runner.hpp"
#include "cloop/scenario_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>

using namespace cloop;
namespace fs = std::filesystem;

namespace {

std::string parse_error(const std::string& text)
{
    try {
        parse_config(text, {}, "c.json");
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

std::map<std::string, std::string> tree(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
    return out;
}

} // namespace

TEST_CASE("config parsing")
{
    const auto cfg = parse_config(R"({
 "seed": 5,
 "generators": [{"kind": "merge", "count": 3, "densities": ["low", "high"]}],
 "planners": ["idm", "centerline"],
 "backgrounds": ["non_reactive_replay", "idm_reactive"],
 "tracker": "kinematic",
 "metrics": {"ttc_threshold": 1.5, "weights": {"ttc": 2}},
 "scenarios": ["scn"],
 "parallelism": 2
})",
                                  "/base");
    CHECK(cfg.seed == 5);
    REQUIRE(cfg.generators.size() == 1);
    CHECK(cfg.generators[0].seed == 5);
    CHECK(cfg.generators[0].densities == std::vector<DensityLevel>{DensityLevel::low, DensityLevel::high});
    CHECK(cfg.planners == std::vector<std::string>{"idm", "centerline"});
    CHECK(cfg.tracker == TrackerMode::kinematic);
    CHECK(cfg.metrics.ttc_threshold == 1.5);
    CHECK(cfg.metrics.weights.ttc == 2.0);
    CHECK(cfg.scenario_paths == std::vector<std::string>{"/base/scn"});
    CHECK(cfg.parallelism == 2);

    CHECK(parse_error(R"({"seed": 1, "backgrounds": ["idm_reactive"]})").find("no scenarios") != std::string::npos);
    const std::string unknown = parse_error("{\n \"seed\": 1,\n \"backgrounds\": [\"idm_reactive\"],\n \"scenarios\": [\"x\"],\n \"colour\": 1\n}");
    CHECK(unknown.find("c.json:5:") == 0);
    CHECK(unknown.find("colour") != std::string::npos);
    CHECK(parse_error(R"({"seed": 1, "backgrounds": ["smart"], "scenarios": ["x"]})").find("backgrounds[0]") !=
          std::string::npos);
    CHECK(parse_error(R"({"seed": -1, "backgrounds": ["idm_reactive"], "scenarios": ["x"]})").find("seed") !=
          std::string::npos);
    CHECK(parse_error(R"({"seed": 1, "planners": ["oracle"], "backgrounds": ["idm_reactive"], "scenarios": ["x"]})")
              .find("planners[0]") != std::string::npos);
}

TEST_CASE("job seeds separate jobs")
{
    std::set<std::uint64_t> seen;
    for (const char* s : {"a", "b"})
        for (const char* p : {"idm", "centerline"})
            for (BackgroundKind k : {BackgroundKind::non_reactive_replay, BackgroundKind::idm_reactive})
                seen.insert(job_seed(1, s, p, k));
    CHECK(seen.size() == 8);
    CHECK(job_seed(1, "a", "idm", BackgroundKind::idm_reactive) == job_seed(1, "a", "idm", BackgroundKind::idm_reactive));
    CHECK(job_seed(1, "a", "idm", BackgroundKind::idm_reactive) != job_seed(2, "a", "idm", BackgroundKind::idm_reactive));
}

TEST_CASE("benchmark outputs are independent of parallelism and re-aggregate from records")
{
    const fs::path root = fs::temp_directory_path() / "cloop_test_runner";
    fs::remove_all(root);
    BenchmarkConfig cfg;
    cfg.seed = 3;
    cfg.generators = {{SuiteKind::car_following, 2, 8, {}}, {SuiteKind::merge, 2, 8, {DensityLevel::mid}}};
    cfg.planners = {"idm", "log_replay"};
    cfg.backgrounds = {BackgroundKind::non_reactive_replay, BackgroundKind::idm_reactive};
    cfg.tracker = TrackerMode::kinematic;
    cfg.svg = true;
    const auto scenarios = resolve_scenarios(cfg);
    REQUIRE(scenarios.size() == 4);

    cfg.output_dir = (root / "seq").string();
    const auto seq = run_benchmark(cfg, scenarios, {});
    cfg.parallelism = 3;
    cfg.output_dir = (root / "par").string();
    const auto par = run_benchmark(cfg, scenarios, {});
    CHECK(tree(root / "seq") == tree(root / "par"));
    CHECK(report_to_json(seq) == report_to_json(par));

    CHECK(seq.records.size() == 16);
    const std::string csv = report_to_csv(seq);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
    CHECK(report_to_json(read_records(root / "seq")) == report_to_json(seq));
    for (const auto& r : seq.records) {
        CHECK(fs::exists(root / "seq" / "records" / (record_name(r) + ".json")));
        CHECK(evaluation_to_json(evaluation_from_json(evaluation_to_json(r))) == evaluation_to_json(r));
        // Inserted density vehicles have no log to replay.
        const bool unreplayable = r.tag.find(":mid") != std::string::npos &&
                                  r.background == BackgroundKind::non_reactive_replay;
        CHECK(r.termination == (unreplayable ? Termination::internal_error : Termination::completed));
    }
    CHECK(fs::exists(root / "seq" / "summary.csv"));
    fs::remove_all(root);
}

TEST_CASE("a missing learned model is an internal error for that job only")
{
    BenchmarkConfig cfg;
    cfg.planners = {"idm"};
    cfg.backgrounds = {BackgroundKind::learned_reactive};
    const Scenario scn = generate_scenario(SuiteKind::car_following, 0, 1);
    const JobResult r = run_job(scn, "idm", BackgroundKind::learned_reactive, cfg, {});
    CHECK(r.evaluation.termination == Termination::internal_error);
    CHECK_FALSE(r.evaluation.error.empty());
    CHECK(r.evaluation.score.composite == 0.0);
}

TEST_CASE("svg series has one frame per second")
{
    const Scenario scn = generate_scenario(SuiteKind::merge, 1, 2);
    BenchmarkConfig cfg;
    const JobResult r = run_job(scn, "centerline", BackgroundKind::non_reactive_replay, cfg, {}, true);
    REQUIRE(r.log);
    const auto frames = render_svg_series(*r.log, scn);
    CHECK(frames.size() == static_cast<std::size_t>(scn.horizon_steps / 10 + 1));
    CHECK(frames.front().rfind("<svg", 0) == 0);
}
