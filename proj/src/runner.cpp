#include "cloop/runner.hpp"

#include "cloop/error.hpp"
#include "cloop/planners.hpp"
#include "cloop/scenario_io.hpp"

#include "json_fields.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace cloop {

using nlohmann::json;
using namespace detail;

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s)
{
    h = fnv1a(h, s.data(), s.size());
    const unsigned char sep = 0xff;
    return fnv1a(h, &sep, 1);
}

IdmParams parse_idm(const json& j, const std::string& path, IdmParams p)
{
    Fields f(j, path);
    p.v0 = opt_number(f, "v0", p.v0);
    p.time_headway = opt_number(f, "time_headway", p.time_headway);
    p.min_gap = opt_number(f, "min_gap", p.min_gap);
    p.a_max = opt_number(f, "a_max", p.a_max);
    p.b = opt_number(f, "b", p.b);
    p.delta = opt_number(f, "delta", p.delta);
    try {
        p.validate();
    } catch (const Error& e) {
        fail(path, e.what());
    }
    return p;
}

bool boolean(const json& j, const std::string& path)
{
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
}

std::vector<std::string> strings(const json& j, const std::string& path)
{
    array(j, path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(text(j[i], index(path, i)));
    return out;
}

MetricConfig parse_metrics(const json& j, const std::string& path)
{
    MetricConfig m;
    Fields f(j, path);
    if (const json* w = f.optional("weights")) {
        Fields g(*w, f.path("weights"));
        m.weights.ttc = opt_number(g, "ttc", m.weights.ttc);
        m.weights.progress = opt_number(g, "progress", m.weights.progress);
        m.weights.speed_limit = opt_number(g, "speed_limit", m.weights.speed_limit);
        m.weights.comfort = opt_number(g, "comfort", m.weights.comfort);
        try {
            m.weights.validate();
        } catch (const Error& e) {
            fail(f.path("weights"), e.what());
        }
    }
    if (const json* c = f.optional("comfort")) {
        Fields g(*c, f.path("comfort"));
        m.comfort.min_lon_accel = opt_number(g, "min_lon_accel", m.comfort.min_lon_accel);
        m.comfort.max_lon_accel = opt_number(g, "max_lon_accel", m.comfort.max_lon_accel);
        m.comfort.max_lat_accel = opt_number(g, "max_lat_accel", m.comfort.max_lat_accel);
        m.comfort.max_jerk = opt_number(g, "max_jerk", m.comfort.max_jerk);
        m.comfort.max_yaw_rate = opt_number(g, "max_yaw_rate", m.comfort.max_yaw_rate);
    }
    m.ttc_threshold = opt_number(f, "ttc_threshold", m.ttc_threshold);
    m.ttc_horizon = opt_number(f, "ttc_horizon", m.ttc_horizon);
    m.ttc_step = opt_number(f, "ttc_step", m.ttc_step);
    if (!(m.ttc_step > 0.0)) fail(f.path("ttc_step"), "must be positive");
    m.max_offroad_distance = opt_number(f, "max_offroad_distance", m.max_offroad_distance);
    m.max_offroad_time = opt_number(f, "max_offroad_time", m.max_offroad_time);
    m.at_fault_min_speed = opt_number(f, "at_fault_min_speed", m.at_fault_min_speed);
    return m;
}

BenchmarkConfig parse_config_document(const json& doc, const fs::path& base)
{
    BenchmarkConfig cfg;
    Fields f(doc, "");
    const json& seed = f.required("seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) fail("seed", "expected a non-negative integer");
    if (seed.is_number_integer() && seed.get<long long>() < 0) fail("seed", "expected a non-negative integer");
    cfg.seed = seed.get<std::uint64_t>();

    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? p : (base / p).string(); };
    if (const json* s = f.optional("scenarios"))
        for (const auto& p : strings(*s, "scenarios")) cfg.scenario_paths.push_back(resolve(p));
    if (const json* g = f.optional("generators")) {
        array(*g, "generators");
        for (std::size_t i = 0; i < g->size(); ++i) {
            const std::string p = index("generators", i);
            Fields gf((*g)[i], p);
            GeneratorSpec spec;
            const std::string kind = text(gf.required("kind"), gf.path("kind"));
            try {
                spec.kind = suite_from_string(kind);
            } catch (const Error& e) {
                fail(gf.path("kind"), e.what());
            }
            spec.count = integer(gf.required("count"), gf.path("count"));
            if (spec.count < 1) fail(gf.path("count"), "must be at least 1");
            if (const json* s = gf.optional("seed")) spec.seed = static_cast<std::uint64_t>(integer(*s, gf.path("seed")));
            else spec.seed = cfg.seed;
            if (const json* d = gf.optional("densities")) {
                const auto levels = strings(*d, gf.path("densities"));
                for (std::size_t k = 0; k < levels.size(); ++k) {
                    try {
                        spec.densities.push_back(density_from_string(levels[k]));
                    } catch (const Error& e) {
                        fail(index(gf.path("densities"), k), e.what());
                    }
                }
            }
            cfg.generators.push_back(spec);
        }
    }
    if (const json* p = f.optional("planner")) cfg.planners = {text(*p, "planner")};
    if (const json* p = f.optional("planners")) cfg.planners = strings(*p, "planners");
    const auto names = planner_names();
    for (std::size_t i = 0; i < cfg.planners.size(); ++i)
        if (std::find(names.begin(), names.end(), cfg.planners[i]) == names.end())
            fail(f.has("planners") ? index("planners", i) : "planner", "unknown planner '" + cfg.planners[i] + "'");
    if (const json* pp = f.optional("planner_params")) {
        Fields g(*pp, "planner_params");
        if (const json* idm = g.optional("idm")) cfg.planner_idm = parse_idm(*idm, g.path("idm"), cfg.planner_idm);
    }

    const auto bgs = strings(f.required("backgrounds"), "backgrounds");
    for (std::size_t i = 0; i < bgs.size(); ++i) {
        try {
            cfg.backgrounds.push_back(background_from_string(bgs[i]));
        } catch (const Error& e) {
            fail(index("backgrounds", i), e.what());
        }
    }
    if (const json* t = f.optional("tracker")) {
        try {
            cfg.tracker = tracker_from_string(text(*t, "tracker"));
        } catch (const Error& e) {
            fail("tracker", e.what());
        }
    }
    if (const json* m = f.optional("metrics")) cfg.metrics = parse_metrics(*m, "metrics");
    if (const json* ib = f.optional("idm_background")) {
        Fields g(*ib, "idm_background");
        if (const json* idm = g.optional("idm")) cfg.idm_background.params = parse_idm(*idm, g.path("idm"), {});
        if (const json* u = g.optional("use_lane_speed_limit"))
            cfg.idm_background.use_lane_speed_limit = boolean(*u, g.path("use_lane_speed_limit"));
        if (const json* u = g.optional("mobil")) cfg.idm_background.enable_mobil = boolean(*u, g.path("mobil"));
        if (const json* mp = g.optional("mobil_params")) {
            Fields h(*mp, g.path("mobil_params"));
            auto& m = cfg.idm_background.mobil;
            m.politeness = opt_number(h, "politeness", m.politeness);
            m.threshold = opt_number(h, "threshold", m.threshold);
            m.b_safe = opt_number(h, "b_safe", m.b_safe);
        }
    }
    if (const json* m = f.optional("model")) cfg.model_path = resolve(text(*m, "model"));
    if (const json* v = f.optional("vocab")) cfg.vocab_path = resolve(text(*v, "vocab"));
    if (const json* d = f.optional("decode")) {
        Fields g(*d, "decode");
        if (const json* s = g.optional("sample")) cfg.decode.sample = boolean(*s, g.path("sample"));
        cfg.decode.temperature = opt_number(g, "temperature", cfg.decode.temperature);
    }
    if (const json* o = f.optional("output_dir")) cfg.output_dir = resolve(text(*o, "output_dir"));
    if (const json* p = f.optional("parallelism")) cfg.parallelism = integer(*p, "parallelism");
    if (cfg.parallelism < 1) fail("parallelism", "must be at least 1");
    if (const json* s = f.optional("svg")) cfg.svg = boolean(*s, "svg");
    if (cfg.scenario_paths.empty() && cfg.generators.empty()) fail("scenarios", "config lists no scenarios or generators");
    if (cfg.backgrounds.empty()) fail("backgrounds", "must list at least one background");
    if (cfg.planners.empty()) fail("planners", "must list at least one planner");
    return cfg;
}

std::string fmt(double v, int precision = 6)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json evaluation_json(const ScenarioEvaluation& ev)
{
    json j{{"scenario_id", ev.scenario_id},
           {"tag", ev.tag},
           {"planner", ev.planner},
           {"background", to_string(ev.background)},
           {"score_label", score_label(ev.background)},
           {"termination", to_string(ev.termination)},
           {"error", ev.error},
           {"composite", ev.score.composite},
           {"soft",
            {{"ttc", ev.score.soft.ttc},
             {"progress", ev.score.soft.progress},
             {"comfort", ev.score.soft.comfort},
             {"speed_limit", ev.score.soft.speed_limit}}},
           {"hard",
            {{"at_fault_collision", ev.score.hard.at_fault_collision},
             {"drivable_area_violation", ev.score.hard.drivable_area_violation}}},
           {"min_ttc", number_or_null(ev.min_ttc)},
           {"progress_m", ev.progress_m},
           {"reference_progress_m", ev.reference_progress_m},
           {"collisions", ev.collisions}};
    if (ev.realism) {
        j["realism"] = {{"ade", ev.realism->ade},
                        {"kinematic", ev.realism->kinematic},
                        {"interaction", ev.realism->interaction},
                        {"map", ev.realism->map},
                        {"composite", ev.realism->composite}};
    } else {
        j["realism"] = nullptr;
    }
    return j;
}

Termination termination_from_string(const std::string& s)
{
    for (Termination t : {Termination::completed, Termination::planner_error, Termination::internal_error})
        if (to_string(t) == s) return t;
    throw Error("unknown termination '" + s + "'");
}

std::optional<double> group_mean(const std::map<BackgroundKind, GroupScore>& g, BackgroundKind k)
{
    auto it = g.find(k);
    if (it == g.end() || it->second.count == 0) return std::nullopt;
    return it->second.mean;
}

constexpr BackgroundKind kAllBackgrounds[] = {BackgroundKind::non_reactive_replay, BackgroundKind::idm_reactive,
                                              BackgroundKind::learned_reactive};

struct DeltaSpec
{
    const char* label;
    BackgroundKind from;
    BackgroundKind to;
};

constexpr DeltaSpec kDeltas[] = {
    {"CLS-SR - CLS-R", BackgroundKind::idm_reactive, BackgroundKind::learned_reactive},
    {"CLS-R - CLS-NR", BackgroundKind::non_reactive_replay, BackgroundKind::idm_reactive},
    {"CLS-SR - CLS-NR", BackgroundKind::non_reactive_replay, BackgroundKind::learned_reactive},
};

json group_json(const std::string& planner, const std::string& tag, const std::map<BackgroundKind, GroupScore>& g)
{
    json j{{"planner", planner}, {"tag", tag}};
    for (BackgroundKind k : kAllBackgrounds) {
        auto m = group_mean(g, k);
        j[score_label(k)] = m ? json(*m) : json(nullptr);
        auto it = g.find(k);
        j["n_" + score_label(k)] = it == g.end() ? 0 : it->second.count;
    }
    json deltas = json::object();
    for (const auto& d : kDeltas) {
        auto a = group_mean(g, d.from);
        auto b = group_mean(g, d.to);
        deltas[d.label] = a && b ? json(*b - *a) : json(nullptr);
    }
    j["deltas"] = deltas;
    return j;
}

const char* kSvgHeader = "<svg xmlns=\"http://www.w3.org/2000/svg\" ";

void svg_polygon(std::ostringstream& os, std::span<const Vec2> pts, const char* fill, const char* stroke, double sw)
{
    os << "<polygon points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << fmt(pts[i].x, 2) << "," << fmt(-pts[i].y, 2);
    os << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" stroke-width=\"" << sw << "\"/>\n";
}

} // namespace

void BenchmarkConfig::validate() const
{
    if (scenario_paths.empty() && generators.empty()) throw Error("benchmark config lists no scenarios");
    if (backgrounds.empty()) throw Error("benchmark config lists no backgrounds");
    if (planners.empty()) throw Error("benchmark config lists no planners");
    if (parallelism < 1) throw Error("parallelism must be at least 1");
}

BenchmarkConfig parse_config(const std::string& text, const fs::path& base_dir, const std::string& source)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(source + ": malformed JSON: " + e.what());
    }
    try {
        return parse_config_document(doc, base_dir);
    } catch (const SchemaError& e) {
        throw Error(format_schema_error(text, source, e));
    }
}

BenchmarkConfig load_config(const fs::path& path)
{
    return parse_config(read_text_file(path), path.parent_path(), path.string());
}

std::vector<Scenario> resolve_scenarios(const BenchmarkConfig& cfg)
{
    std::vector<Scenario> out;
    for (const auto& p : cfg.scenario_paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) out.push_back(load_scenario(f));
        } else {
            out.push_back(load_scenario(p));
        }
    }
    for (const auto& g : cfg.generators) {
        for (Scenario& base : generate_suite(g.kind, g.count, g.seed)) {
            if (g.densities.empty()) {
                out.push_back(std::move(base));
                continue;
            }
            for (DensityLevel level : g.densities) {
                Scenario s = augment_density(base, level, fnv1a(g.seed ^ 0xcbf29ce484222325ULL, base.id));
                s.id = base.id + "_" + to_string(level);
                out.push_back(std::move(s));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].id == out[i - 1].id) throw Error("duplicate scenario id '" + out[i].id + "'");
    return out;
}

BackgroundResources load_resources(const BenchmarkConfig& cfg)
{
    BackgroundResources r;
    r.idm = cfg.idm_background;
    r.decode = cfg.decode;
    const bool learned = std::find(cfg.backgrounds.begin(), cfg.backgrounds.end(), BackgroundKind::learned_reactive) !=
                         cfg.backgrounds.end();
    if (learned) {
        if (cfg.model_path.empty() || cfg.vocab_path.empty())
            throw Error("learned_reactive background requires 'model' and 'vocab' in the config");
        auto vocab = std::make_shared<TokenVocabulary>(load_vocabulary(cfg.vocab_path));
        r.model = std::make_shared<TokenPolicyModel>(load_model(cfg.model_path, *vocab));
        r.vocab = vocab;
    }
    return r;
}

std::uint64_t job_seed(std::uint64_t seed, const std::string& scenario_id, const std::string& planner,
                       BackgroundKind background)
{
    std::uint64_t h = fnv1a(0xcbf29ce484222325ULL, &seed, sizeof seed);
    h = fnv1a(h, scenario_id);
    h = fnv1a(h, planner);
    return fnv1a(h, to_string(background));
}

JobResult run_job(const Scenario& scn, const std::string& planner_name, BackgroundKind background,
                  const BenchmarkConfig& cfg, const BackgroundResources& resources, bool keep_log)
{
    JobResult r;
    try {
        auto planner = make_planner(planner_name, cfg.planner_idm, cfg.metrics);
        auto bg = make_background(background, resources);
        RolloutLog log =
            run_scenario(scn, *planner, *bg, cfg.tracker, job_seed(cfg.seed, scn.id, planner_name, background));
        r.evaluation = evaluate_rollout(log, scn, cfg.metrics);
        if (keep_log) r.log = std::move(log);
    } catch (const std::exception& e) {
        ScenarioEvaluation ev;
        ev.scenario_id = scn.id;
        ev.tag = scn.tag;
        ev.planner = planner_name;
        ev.background = background;
        ev.score.background = background;
        ev.termination = Termination::internal_error;
        ev.error = e.what();
        r.evaluation = ev;
        r.log.reset();
    }
    return r;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const std::vector<Scenario>& scenarios,
                              const BackgroundResources& resources, bool write_outputs)
{
    if (scenarios.empty()) throw Error("benchmark has no scenarios");
    if (cfg.backgrounds.empty()) throw Error("benchmark config lists no backgrounds");
    if (cfg.planners.empty()) throw Error("benchmark config lists no planners");
    if (cfg.parallelism < 1) throw Error("parallelism must be at least 1");
    struct Job
    {
        const Scenario* scn;
        std::string planner;
        BackgroundKind background;
    };
    std::vector<Job> jobs;
    for (const auto& s : scenarios)
        for (const auto& p : cfg.planners)
            for (BackgroundKind b : cfg.backgrounds) jobs.push_back({&s, p, b});
    std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
        return std::tie(a.scn->id, a.planner, a.background) < std::tie(b.scn->id, b.planner, b.background);
    });

    std::vector<ScenarioEvaluation> results(jobs.size());
    const bool svg = cfg.svg && write_outputs;
    const long n = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.parallelism)
    for (long i = 0; i < n; ++i) {
        const Job& job = jobs[static_cast<std::size_t>(i)];
        JobResult r = run_job(*job.scn, job.planner, job.background, cfg, resources, svg);
        if (svg && r.log) {
            try {
                write_svg_series(*r.log, *job.scn, fs::path(cfg.output_dir) / "svg" / record_name(r.evaluation));
            } catch (const std::exception& e) {
                r.evaluation.termination = Termination::internal_error;
                r.evaluation.error = std::string("svg: ") + e.what();
            }
        }
        results[static_cast<std::size_t>(i)] = std::move(r.evaluation);
    }
    BenchmarkReport report = aggregate_benchmark(std::move(results));
    if (write_outputs) write_report(report, cfg.output_dir);
    return report;
}

std::string record_name(const ScenarioEvaluation& ev)
{
    return ev.scenario_id + "__" + ev.planner + "__" + to_string(ev.background);
}

std::string evaluation_to_json(const ScenarioEvaluation& ev)
{
    return evaluation_json(ev).dump(1) + "\n";
}

ScenarioEvaluation evaluation_from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        ScenarioEvaluation ev;
        ev.scenario_id = j.at("scenario_id").get<std::string>();
        ev.tag = j.at("tag").get<std::string>();
        ev.planner = j.at("planner").get<std::string>();
        ev.background = background_from_string(j.at("background").get<std::string>());
        ev.termination = termination_from_string(j.at("termination").get<std::string>());
        ev.error = j.at("error").get<std::string>();
        ev.score.background = ev.background;
        ev.score.composite = j.at("composite").get<double>();
        const json& soft = j.at("soft");
        ev.score.soft = {soft.at("ttc").get<double>(), soft.at("progress").get<double>(),
                         soft.at("comfort").get<double>(), soft.at("speed_limit").get<double>()};
        const json& hard = j.at("hard");
        ev.score.hard = {hard.at("at_fault_collision").get<bool>(), hard.at("drivable_area_violation").get<bool>()};
        ev.min_ttc = j.at("min_ttc").is_null() ? std::numeric_limits<double>::infinity() : j.at("min_ttc").get<double>();
        ev.progress_m = j.at("progress_m").get<double>();
        ev.reference_progress_m = j.at("reference_progress_m").get<double>();
        ev.collisions = j.at("collisions").get<int>();
        if (!j.at("realism").is_null()) {
            const json& r = j.at("realism");
            ev.realism = RealismReport{r.at("ade").get<double>(), r.at("kinematic").get<double>(),
                                       r.at("interaction").get<double>(), r.at("map").get<double>(),
                                       r.at("composite").get<double>()};
        }
        return ev;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed scenario record: ") + e.what());
    }
}

std::string report_to_json(const BenchmarkReport& report)
{
    json groups = json::array();
    for (const auto& [planner, g] : report.by_planner) {
        groups.push_back(group_json(planner, "all", g));
        for (const auto& [tag, tg] : report.by_planner_tag.at(planner)) groups.push_back(group_json(planner, tag, tg));
    }
    json records = json::array();
    for (const auto& r : report.records) records.push_back(evaluation_json(r));
    json doc{{"groups", groups},
             {"planner_errors", report.planner_errors},
             {"internal_errors", report.internal_errors},
             {"records", records}};
    return doc.dump(1) + "\n";
}

std::string report_to_csv(const BenchmarkReport& report)
{
    std::ostringstream os;
    os << "scenario_id,tag,planner,background,score_label,termination,ttc,progress,comfort,speed_limit,"
          "at_fault_collision,drivable_area_violation,composite,min_ttc,progress_m,reference_progress_m,collisions,"
          "ade,realism_kinematic,realism_interaction,realism_map,realism_composite\n";
    for (const auto& r : report.records) {
        const auto& s = r.score;
        os << r.scenario_id << ',' << r.tag << ',' << r.planner << ',' << to_string(r.background) << ','
           << score_label(r.background) << ',' << to_string(r.termination) << ',' << fmt(s.soft.ttc) << ','
           << fmt(s.soft.progress) << ',' << fmt(s.soft.comfort) << ',' << fmt(s.soft.speed_limit) << ','
           << (s.hard.at_fault_collision ? 1 : 0) << ',' << (s.hard.drivable_area_violation ? 1 : 0) << ','
           << fmt(s.composite) << ',' << fmt(r.min_ttc) << ',' << fmt(r.progress_m) << ','
           << fmt(r.reference_progress_m) << ',' << r.collisions;
        if (r.realism)
            os << ',' << fmt(r.realism->ade) << ',' << fmt(r.realism->kinematic) << ',' << fmt(r.realism->interaction)
               << ',' << fmt(r.realism->map) << ',' << fmt(r.realism->composite);
        else
            os << ",,,,,";
        os << '\n';
    }
    return os.str();
}

std::string summary_table(const BenchmarkReport& report)
{
    std::ostringstream os;
    os << "planner,tag,n,CLS-NR,CLS-R,CLS-SR";
    for (const auto& d : kDeltas) os << ',' << d.label;
    os << '\n';
    auto row = [&](const std::string& planner, const std::string& tag, const std::map<BackgroundKind, GroupScore>& g) {
        int n = 0;
        for (const auto& [k, s] : g) n = std::max(n, s.count);
        os << planner << ',' << tag << ',' << n;
        for (BackgroundKind k : kAllBackgrounds) {
            auto m = group_mean(g, k);
            os << ',' << (m ? fmt(*m, 2) : "");
        }
        for (const auto& d : kDeltas) {
            auto a = group_mean(g, d.from);
            auto b = group_mean(g, d.to);
            os << ',' << (a && b ? fmt(*b - *a, 2) : "");
        }
        os << '\n';
    };
    for (const auto& [planner, g] : report.by_planner) {
        row(planner, "all", g);
        for (const auto& [tag, tg] : report.by_planner_tag.at(planner)) row(planner, tag, tg);
    }
    return os.str();
}

void write_report(const BenchmarkReport& report, const fs::path& dir)
{
    fs::create_directories(dir / "records");
    write_text_file(dir / "report.json", report_to_json(report));
    write_text_file(dir / "report.csv", report_to_csv(report));
    write_text_file(dir / "summary.csv", summary_table(report));
    for (const auto& r : report.records) write_text_file(dir / "records" / (record_name(r) + ".json"), evaluation_to_json(r));
}

BenchmarkReport read_records(const fs::path& dir)
{
    const fs::path records = fs::is_directory(dir / "records") ? dir / "records" : dir;
    if (!fs::is_directory(records)) throw Error("no records directory at " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(records))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<ScenarioEvaluation> evs;
    for (const auto& f : files) {
        try {
            evs.push_back(evaluation_from_json(read_text_file(f)));
        } catch (const Error& e) {
            throw Error(f.string() + ": " + e.what());
        }
    }
    return aggregate_benchmark(std::move(evs));
}

std::vector<std::string> render_svg_series(const RolloutLog& log, const Scenario& scn)
{
    std::vector<std::string> frames;
    const int stride = std::max(1, static_cast<int>(std::lround(1.0 / log.dt)));
    for (std::size_t k = 0; k < log.snapshots.size(); k += static_cast<std::size_t>(stride)) {
        const WorldSnapshot& s = log.snapshots[k];
        const Vec2 c = s.ego.pose.position();
        const double half = 60.0;
        std::ostringstream os;
        os << kSvgHeader << "viewBox=\"" << fmt(c.x - half, 2) << ' ' << fmt(-c.y - half, 2) << ' ' << fmt(2 * half, 2)
           << ' ' << fmt(2 * half, 2) << "\" width=\"600\" height=\"600\">\n";
        os << "<rect x=\"" << fmt(c.x - half, 2) << "\" y=\"" << fmt(-c.y - half, 2) << "\" width=\"" << 2 * half
           << "\" height=\"" << 2 * half << "\" fill=\"#f4f4f0\"/>\n";
        for (const auto& [id, lane] : scn.lane_graph->lanes()) {
            const bool on_route = scn.route.contains_lane(id);
            svg_polygon(os, lane.polygon(), on_route ? "#d8dde6" : "#e2e2e2", "#b0b0b0", 0.1);
        }
        for (const auto& [id, lane] : scn.lane_graph->lanes()) {
            os << "<polyline points=\"";
            const auto& pts = lane.centerline().points();
            for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << fmt(pts[i].x, 2) << "," << fmt(-pts[i].y, 2);
            os << "\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"0.15\" stroke-dasharray=\"1.5,1.5\"/>\n";
        }
        for (const auto& a : s.agents) svg_polygon(os, a.footprint(), "#4a78b5", "#22406a", 0.1);
        svg_polygon(os, s.ego.footprint(), "#d0463c", "#7a1f18", 0.1);
        os << "<text x=\"" << fmt(c.x - half + 2, 2) << "\" y=\"" << fmt(-c.y - half + 5, 2)
           << "\" font-size=\"4\" font-family=\"monospace\">" << scn.id << " t=" << fmt(static_cast<double>(k) * log.dt, 1)
           << "s</text>\n</svg>\n";
        frames.push_back(os.str());
    }
    return frames;
}

void write_svg_series(const RolloutLog& log, const Scenario& scn, const fs::path& dir)
{
    const auto frames = render_svg_series(log, scn);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "t%03zu.svg", i);
        write_text_file(dir / name, frames[i]);
    }
}

} // namespace cloop
