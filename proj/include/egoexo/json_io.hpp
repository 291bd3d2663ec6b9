#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace egoexo {

using Json = nlohmann::json;

// Deterministic JSON text: keys sorted, two-space indent, floats printed with
// 17 significant digits and always carrying a decimal point or exponent so a
// parse/dump cycle reproduces the bytes exactly. Non-finite floats throw.
std::string canonical_dump(const Json& value);

// Formats one double the way canonical_dump does.
std::string format_double(double value);

Json read_json_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

inline void write_json_file(const std::filesystem::path& path, const Json& value) {
  atomic_write_file(path, canonical_dump(value));
}

}  // namespace egoexo
