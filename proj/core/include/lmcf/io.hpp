#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "lmcf/geom.hpp"

namespace lmcf {

using json = nlohmann::json;

json curve_to_json(const PolyCurve& c);
PolyCurve curve_from_json(const json& j);

json read_json_file(const std::filesystem::path& p);
// Writes with 17 significant digits; creates parent directories.
void write_json_file(const std::filesystem::path& p, const json& j);
void write_text_file(const std::filesystem::path& p, const std::string& text);

PolyCurve read_curve(const std::filesystem::path& p);
void write_curve(const std::filesystem::path& p, const PolyCurve& c);

}  // namespace lmcf
