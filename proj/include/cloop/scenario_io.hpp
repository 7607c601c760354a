#pragma once

#include "cloop/scenario.hpp"

#include <filesystem>
#include <string>

namespace cloop {

constexpr int kScenarioSchemaVersion = 1;

/// Canonical JSON text. Saving a loaded file again reproduces it byte for byte.
std::string serialize_scenario(const Scenario& scn);

/// Parses and validates a scenario document. Schema violations throw Error
/// with the message "<source>:<line>: field '<path>': <reason>".
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scn, const std::filesystem::path& path);

/// Line (1-based) of the value at a dotted path such as "lanes[2].width",
/// or 0 when the path does not occur in the text.
int locate_json_line(const std::string& text, const std::string& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace cloop
