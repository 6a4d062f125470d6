#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace deconf::cli {

using Json = nlohmann::ordered_json;

/// Every key the tool understands, with its default. Printed by
/// `deconf defaults`.
Json default_config();

/// Overlays `patch` onto `base`. Keys absent from the defaults are rejected,
/// as are values whose JSON type differs from the default's. `where` names
/// the source in error messages.
void merge_config(Json& base, const Json& patch, const std::string& where);

Json read_config_file(const std::filesystem::path& path);

/// Parses `section.key=value` where value is JSON, falling back to a plain
/// string when it does not parse.
Json dotted_assignment(const std::string& text);

/// Compact single-line rendering used in `# config=` echo lines.
std::string echo(const Json& j);

}  // namespace deconf::cli
