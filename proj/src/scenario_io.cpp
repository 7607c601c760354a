#include "cloop/scenario_io.hpp"

#include "cloop/error.hpp"

#include "json_fields.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cloop {

using nlohmann::json;

using namespace detail;

namespace {

// Walks the raw text and records the line of every value by dotted path.
class LineScanner
{
public:
    explicit LineScanner(const std::string& text) : t_(text) {}

    std::map<std::string, int> scan()
    {
        skip_ws();
        value("");
        return lines_;
    }

private:
    void skip_ws()
    {
        while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) {
            if (t_[i_] == '\n') ++line_;
            ++i_;
        }
    }

    std::string string_token()
    {
        std::string out;
        ++i_;
        while (i_ < t_.size() && t_[i_] != '"') {
            if (t_[i_] == '\\' && i_ + 1 < t_.size()) ++i_;
            out += t_[i_++];
        }
        ++i_;
        return out;
    }

    void value(const std::string& path)
    {
        if (i_ >= t_.size()) return;
        lines_.emplace(path, line_);
        const char c = t_[i_];
        if (c == '{') {
            ++i_;
            skip_ws();
            while (i_ < t_.size() && t_[i_] != '}') {
                if (t_[i_] != '"') return;
                const std::string key = string_token();
                skip_ws();
                if (i_ < t_.size() && t_[i_] == ':') ++i_;
                skip_ws();
                value(path.empty() ? key : path + "." + key);
                skip_ws();
                if (i_ < t_.size() && t_[i_] == ',') ++i_;
                skip_ws();
            }
            ++i_;
        } else if (c == '[') {
            ++i_;
            skip_ws();
            int k = 0;
            while (i_ < t_.size() && t_[i_] != ']') {
                value(path + "[" + std::to_string(k++) + "]");
                skip_ws();
                if (i_ < t_.size() && t_[i_] == ',') ++i_;
                skip_ws();
            }
            ++i_;
        } else if (c == '"') {
            string_token();
        } else {
            while (i_ < t_.size() && !std::strchr(",]} \t\r\n", t_[i_])) ++i_;
        }
    }

    const std::string& t_;
    std::size_t i_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;
};

Vec2 point(const json& j, const std::string& path)
{
    if (!j.is_array() || j.size() != 2) fail(path, "expected [x, y]");
    return {number(j[0], index(path, 0)), number(j[1], index(path, 1))};
}

AgentState parse_agent(const json& j, const std::string& path)
{
    Fields f(j, path);
    AgentState a;
    a.id = integer(f.required("id"), f.path("id"));
    const double x = number(f.required("x"), f.path("x"));
    const double y = number(f.required("y"), f.path("y"));
    const double h = number(f.required("heading"), f.path("heading"));
    a.pose = Pose2D(x, y, h);
    a.speed = number(f.required("speed"), f.path("speed"));
    if (a.speed < 0.0) fail(f.path("speed"), "must be non-negative");
    a.acceleration = opt_number(f, "acceleration", 0.0);
    a.length = opt_number(f, "length", a.length);
    a.width = opt_number(f, "width", a.width);
    if (!(a.length > 0.0)) fail(f.path("length"), "must be positive");
    if (!(a.width > 0.0)) fail(f.path("width"), "must be positive");
    if (const json* k = f.optional("kind")) {
        const std::string kind = text(*k, f.path("kind"));
        if (kind == "vehicle") a.kind = AgentKind::vehicle;
        else if (kind == "static_object") a.kind = AgentKind::static_object;
        else fail(f.path("kind"), "expected \"vehicle\" or \"static_object\"");
    }
    return a;
}

LaneSpec parse_lane(const json& j, const std::string& path)
{
    Fields f(j, path);
    LaneSpec l;
    l.id = integer(f.required("id"), f.path("id"));
    const json& pts = array(f.required("centerline"), f.path("centerline"));
    if (pts.size() < 2) fail(f.path("centerline"), "needs at least two points");
    for (std::size_t i = 0; i < pts.size(); ++i) l.centerline.push_back(point(pts[i], index(f.path("centerline"), i)));
    l.width = opt_number(f, "width", l.width);
    if (!(l.width > 0.0)) fail(f.path("width"), "must be positive");
    l.speed_limit = opt_number(f, "speed_limit", l.speed_limit);
    if (!(l.speed_limit > 0.0)) fail(f.path("speed_limit"), "must be positive");
    if (const json* s = f.optional("successors")) {
        array(*s, f.path("successors"));
        for (std::size_t i = 0; i < s->size(); ++i)
            l.successors.push_back(integer((*s)[i], index(f.path("successors"), i)));
    }
    if (const json* n = f.optional("left_neighbor")) l.left_neighbor = integer(*n, f.path("left_neighbor"));
    if (const json* n = f.optional("right_neighbor")) l.right_neighbor = integer(*n, f.path("right_neighbor"));
    return l;
}

Trajectory parse_future(const json& j, const std::string& path)
{
    array(j, path);
    Trajectory t;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = index(path, i);
        if (!j[i].is_array() || j[i].size() != 5) fail(p, "expected [t, x, y, heading, speed]");
        TrajectorySample s;
        s.t = number(j[i][0], index(p, 0));
        s.pose = Pose2D(number(j[i][1], index(p, 1)), number(j[i][2], index(p, 2)), number(j[i][3], index(p, 3)));
        s.speed = number(j[i][4], index(p, 4));
        if (s.speed < 0.0) fail(index(p, 4), "speed must be non-negative");
        t.push_back(s);
    }
    return t;
}

Scenario parse_document(const json& doc)
{
    Fields f(doc, "");
    const int version = integer(f.required("schema_version"), "schema_version");
    if (version != kScenarioSchemaVersion)
        fail("schema_version", "unsupported version " + std::to_string(version) + ", expected " +
                                   std::to_string(kScenarioSchemaVersion));
    Scenario s;
    s.id = text(f.required("id"), "id");
    if (s.id.empty()) fail("id", "must not be empty");
    if (const json* t = f.optional("tag")) s.tag = text(*t, "tag");
    s.dt = opt_number(f, "dt", kDefaultDt);
    if (!(s.dt > 0.0)) fail("dt", "must be positive");
    if (const json* h = f.optional("horizon_steps")) s.horizon_steps = integer(*h, "horizon_steps");
    if (s.horizon_steps < 1) fail("horizon_steps", "must be at least 1");

    const json& lanes = array(f.required("lanes"), "lanes");
    std::vector<LaneSpec> specs;
    std::map<int, std::size_t> lane_index;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        specs.push_back(parse_lane(lanes[i], index("lanes", i)));
        if (!lane_index.emplace(specs.back().id, i).second) fail(index("lanes", i) + ".id", "duplicate lane id");
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::string p = index("lanes", i);
        for (std::size_t k = 0; k < specs[i].successors.size(); ++k)
            if (!lane_index.count(specs[i].successors[k]))
                fail(index(p + ".successors", k), "unknown lane id " + std::to_string(specs[i].successors[k]));
        if (specs[i].left_neighbor && !lane_index.count(*specs[i].left_neighbor))
            fail(p + ".left_neighbor", "unknown lane id " + std::to_string(*specs[i].left_neighbor));
        if (specs[i].right_neighbor && !lane_index.count(*specs[i].right_neighbor))
            fail(p + ".right_neighbor", "unknown lane id " + std::to_string(*specs[i].right_neighbor));
    }
    try {
        s.lane_graph = std::make_shared<LaneGraph>(specs);
    } catch (const Error& e) {
        fail("lanes", e.what());
    }

    s.ego = parse_agent(f.required("ego"), "ego");
    if (s.ego.id != kEgoId) fail("ego.id", "ego id must be " + std::to_string(kEgoId));
    if (const json* agents = f.optional("agents")) {
        array(*agents, "agents");
        std::set<int> ids{kEgoId};
        for (std::size_t i = 0; i < agents->size(); ++i) {
            s.agents.push_back(parse_agent((*agents)[i], index("agents", i)));
            if (!ids.insert(s.agents.back().id).second) fail(index("agents", i) + ".id", "duplicate agent id");
        }
    }

    const json& route = array(f.required("route"), "route");
    if (route.empty()) fail("route", "must list at least one lane");
    std::vector<int> route_ids;
    for (std::size_t i = 0; i < route.size(); ++i) {
        route_ids.push_back(integer(route[i], index("route", i)));
        if (!lane_index.count(route_ids.back()))
            fail(index("route", i), "unknown lane id " + std::to_string(route_ids.back()));
    }
    try {
        s.route = Route(route_ids, *s.lane_graph);
    } catch (const Error& e) {
        fail("route", e.what());
    }

    if (const json* lf = f.optional("logged_futures")) {
        if (!lf->is_object()) fail("logged_futures", "expected an object keyed by agent id");
        for (const auto& [key, value] : lf->items()) {
            const std::string p = "logged_futures." + key;
            int id = 0;
            try {
                std::size_t used = 0;
                id = std::stoi(key, &used);
                if (used != key.size()) throw std::invalid_argument(key);
            } catch (const std::exception&) {
                fail(p, "key must be an agent id");
            }
            s.logged_futures[id] = parse_future(value, p);
        }
    }

    try {
        validate_scenario(s);
    } catch (const Error& e) {
        fail("", e.what());
    }
    return s;
}

json agent_json(const AgentState& a)
{
    return json{{"id", a.id},
                {"x", a.pose.x},
                {"y", a.pose.y},
                {"heading", a.pose.heading()},
                {"speed", a.speed},
                {"acceleration", a.acceleration},
                {"length", a.length},
                {"width", a.width},
                {"kind", a.kind == AgentKind::vehicle ? "vehicle" : "static_object"}};
}

} // namespace

int locate_json_line(const std::string& text, const std::string& path)
{
    const auto lines = LineScanner(text).scan();
    auto it = lines.find(path);
    return it == lines.end() ? 0 : it->second;
}

namespace detail {

std::string format_schema_error(const std::string& text, const std::string& source, const SchemaError& e)
{
    std::string p = e.path;
    int line = 0;
    while (true) {
        line = locate_json_line(text, p);
        if (line > 0 || p.empty()) break;
        const auto cut = p.find_last_of(".[");
        p = cut == std::string::npos ? "" : p.substr(0, cut);
    }
    return source + ":" + std::to_string(std::max(line, 1)) + ": field '" + e.path + "': " + e.reason;
}

} // namespace detail

std::string serialize_scenario(const Scenario& scn)
{
    json doc;
    doc["schema_version"] = kScenarioSchemaVersion;
    doc["id"] = scn.id;
    doc["tag"] = scn.tag;
    doc["dt"] = scn.dt;
    doc["horizon_steps"] = scn.horizon_steps;
    json lanes = json::array();
    for (const LaneSpec& l : scn.lane_graph->specs()) {
        json pts = json::array();
        for (const Vec2& p : l.centerline) pts.push_back({p.x, p.y});
        json lane{{"id", l.id}, {"centerline", pts}, {"width", l.width}, {"speed_limit", l.speed_limit},
                  {"successors", l.successors}};
        if (l.left_neighbor) lane["left_neighbor"] = *l.left_neighbor;
        if (l.right_neighbor) lane["right_neighbor"] = *l.right_neighbor;
        lanes.push_back(std::move(lane));
    }
    doc["lanes"] = std::move(lanes);
    doc["ego"] = agent_json(scn.ego);
    json agents = json::array();
    for (const auto& a : scn.agents) agents.push_back(agent_json(a));
    doc["agents"] = std::move(agents);
    doc["route"] = scn.route.lane_ids();
    if (!scn.logged_futures.empty()) {
        json lf = json::object();
        for (const auto& [id, traj] : scn.logged_futures) {
            json samples = json::array();
            for (const auto& s : traj) samples.push_back({s.t, s.pose.x, s.pose.y, s.pose.heading(), s.speed});
            lf[std::to_string(id)] = std::move(samples);
        }
        doc["logged_futures"] = std::move(lf);
    }
    std::string out = doc.dump(1);
    out += '\n';
    return out;
}

Scenario parse_scenario(const std::string& text, const std::string& source)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        int line = 1;
        for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw Error(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    try {
        return parse_document(doc);
    } catch (const SchemaError& e) {
        throw Error(format_schema_error(text, source, e));
    }
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path)
{
    return parse_scenario(read_text_file(path), path.string());
}

void save_scenario(const Scenario& scn, const std::filesystem::path& path)
{
    write_text_file(path, serialize_scenario(scn));
}

} // namespace cloop
