#include "lmcf/io.hpp"

#include <fstream>
#include <sstream>

namespace lmcf {

json curve_to_json(const PolyCurve& c) {
  json j;
  j["topology"] = c.closed() ? "closed-loop" : "open-arc";
  j["h"] = c.h;
  json v = json::array();
  for (auto p : c.vertices) v.push_back({p.x, p.y});
  j["vertices"] = std::move(v);
  json r = json::array();
  for (auto& ray : c.rays) r.push_back({{"angle", ray.angle}, {"reach", ray.reach}});
  j["rays"] = std::move(r);
  return j;
}

PolyCurve curve_from_json(const json& j) {
  PolyCurve c;
  std::string topo = j.at("topology").get<std::string>();
  if (topo == "closed-loop") c.topology = Topology::ClosedLoop;
  else if (topo == "open-arc") c.topology = Topology::OpenArc;
  else throw GeometryError("unknown topology '" + topo + "'");
  c.h = j.value("h", 0.0);
  for (auto& p : j.at("vertices")) c.vertices.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  if (j.contains("rays"))
    for (auto& r : j.at("rays")) c.rays.push_back({r.at("angle").get<double>(), r.at("reach").get<double>()});
  if (c.h <= 0 && c.size() > 1) c.h = total_length(c) / static_cast<double>(c.edge_count());
  return c;
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

namespace {
// nlohmann emits the shortest round-trip representation, which already carries 17 significant digits when needed
std::string dump(const json& j) { return j.dump(1); }
}  // namespace

void write_json_file(const std::filesystem::path& p, const json& j) { write_text_file(p, dump(j) + "\n"); }

PolyCurve read_curve(const std::filesystem::path& p) { return curve_from_json(read_json_file(p)); }
void write_curve(const std::filesystem::path& p, const PolyCurve& c) { write_json_file(p, curve_to_json(c)); }

}  // namespace lmcf
