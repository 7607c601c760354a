#include "cloop/error.hpp"
#include "cloop/generators.hpp"
#include "cloop/scenario_io.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>

using namespace cloop;
using nlohmann::json;

namespace {

std::string message_of(const std::string& text)
{
    try {
        parse_scenario(text, "s.json");
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("scenario files round trip byte for byte")
{
    for (SuiteKind k : {SuiteKind::car_following, SuiteKind::lane_change, SuiteKind::merge,
                        SuiteKind::intersection_lite, SuiteKind::cut_in}) {
        const Scenario scn = generate_scenario(k, 2, 17);
        const std::string text = serialize_scenario(scn);
        const Scenario back = parse_scenario(text);
        CHECK(serialize_scenario(back) == text);
        CHECK(back.id == scn.id);
        CHECK(back.agents == scn.agents);
        CHECK(back.logged_futures == scn.logged_futures);
        CHECK(back.route.lane_ids() == scn.route.lane_ids());
    }
    const auto dir = std::filesystem::temp_directory_path() / "cloop_test_io";
    std::filesystem::create_directories(dir);
    const Scenario scn = generate_scenario(SuiteKind::merge, 0, 1);
    save_scenario(scn, dir / "a.json");
    save_scenario(load_scenario(dir / "a.json"), dir / "b.json");
    CHECK(read_text_file(dir / "a.json") == read_text_file(dir / "b.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("schema errors name the field and its line")
{
    const std::string good = serialize_scenario(generate_scenario(SuiteKind::car_following, 0, 4));
    json doc = json::parse(good);

    json bad = doc;
    bad["lanes"][1]["width"] = -2.0;
    std::string text = bad.dump(1);
    std::string msg = message_of(text);
    CHECK(msg.find("field 'lanes[1].width'") != std::string::npos);
    const int line = locate_json_line(text, "lanes[1].width");
    CHECK(line > 0);
    CHECK(msg.rfind("s.json:" + std::to_string(line) + ":", 0) == 0);

    bad = doc;
    bad["agents"][0]["colour"] = "red";
    msg = message_of(bad.dump(1));
    CHECK(msg.find("agents[0].colour") != std::string::npos);
    CHECK(msg.find("unknown field") != std::string::npos);

    bad = doc;
    bad["ego"].erase("speed");
    CHECK(message_of(bad.dump(1)).find("field 'ego.speed'") != std::string::npos);
    bad = doc;
    bad["horizon_steps"] = 0;
    CHECK(message_of(bad.dump(1)).find("horizon_steps") != std::string::npos);

    bad = doc;
    bad["lanes"][0]["successors"] = json::array({999});
    CHECK(message_of(bad.dump(1)).find("999") != std::string::npos);

    bad = doc;
    bad["schema_version"] = kScenarioSchemaVersion + 1;
    CHECK(message_of(bad.dump(1)).find("schema_version") != std::string::npos);

    CHECK(message_of("{\n \"id\": ,\n}").find("malformed JSON") != std::string::npos);
    CHECK(message_of(good).empty());
}

TEST_CASE("locate_json_line")
{
    const std::string text = "{\n \"a\": [\n  {\"b\": 1},\n  {\n   \"b\": 2\n  }\n ]\n}";
    CHECK(locate_json_line(text, "a") == 2);
    CHECK(locate_json_line(text, "a[1].b") == 5);
    CHECK(locate_json_line(text, "zz") == 0);
}
