#include "lmcf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "lmcf/numerics.hpp"

namespace lmcf {

namespace fs = std::filesystem;

namespace {

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }
Vec2 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string dyadic_name(double s) {
  int e = 0;
  double m = std::frexp(s, &e);
  if (m == 0.5) return "s_2m" + std::to_string(1 - e);
  char buf[64];
  std::snprintf(buf, sizeof buf, "s_%.6g", s);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PipelineError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string dumped(const json& j) { return j.dump(1) + "\n"; }

}  // namespace

ToleranceTable tolerance_table(int version) {
  if (version != 1) throw PipelineError("unknown tolerance table version " + std::to_string(version));
  return ToleranceTable{};
}

json to_json(const ToleranceTable& t) {
  return {{"version", t.version},
          {"expander_residual", t.expander_residual},
          {"uniqueness", t.uniqueness},
          {"decay_quality", t.decay_quality},
          {"seam_jump", t.seam_jump},
          {"uniform_factor", t.uniform_factor},
          {"eps0", t.eps0},
          {"white_factor", t.white_factor},
          {"huisken_base", t.huisken_base},
          {"huisken_factor", t.huisken_factor},
          {"alpha_factor", t.alpha_factor},
          {"eta_factor", t.eta_factor},
          {"rescaling", t.rescaling},
          {"closed_form", t.closed_form},
          {"limit_distance", t.limit_distance},
          {"limit_ball", t.limit_ball},
          {"limit_time", t.limit_time}};
}

double Scenario::h_for(double s) const { return std::min(h_max, h_rel * std::sqrt(2.0 * s)); }

FlowConfig Scenario::flow_config(double s) const {
  FlowConfig cfg;
  cfg.h = h_for(s);
  cfg.dt = dt;
  cfg.dt_factor = dt_factor;
  return cfg;
}

Scenario demo_scenario() {
  Scenario sc;
  sc.s_grid = parse_s_grid("2^-4..2^-8");
  return sc;
}

std::vector<double> parse_s_grid(const std::string& text) {
  std::vector<double> out;
  auto dots = text.find("..");
  if (dots != std::string::npos) {
    auto exponent = [&](const std::string& part) {
      auto caret = part.find('^');
      if (caret == std::string::npos || part.substr(0, caret) != "2")
        throw PipelineError("expected 2^k in s-grid range '" + text + "'");
      return std::stoi(part.substr(caret + 1));
    };
    int a = exponent(text.substr(0, dots)), b = exponent(text.substr(dots + 2));
    int step = a <= b ? 1 : -1;
    for (int k = a;; k += step) {
      out.push_back(std::ldexp(1.0, k));
      if (k == b) break;
    }
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto caret = item.find('^');
    if (caret != std::string::npos && item.substr(0, caret) == "2")
      out.push_back(std::ldexp(1.0, std::stoi(item.substr(caret + 1))));
    else
      out.push_back(std::stod(item));
  }
  if (out.empty()) throw PipelineError("empty s-grid '" + text + "'");
  return out;
}

json scenario_to_json(const Scenario& sc) {
  const auto& c = sc.checks;
  json centers = json::array();
  for (auto p : c.huisken_centers) centers.push_back(vec_json(p));
  return {{"name", sc.name},
          {"kind", sc.kind},
          {"line_pair",
           {{"phi1", sc.pair.phi1}, {"phi2", sc.pair.phi2}, {"pairing", sc.pair.pairing}, {"alpha_min", sc.pair.alpha_min}}},
          {"init", {{"recipe", "figure-eight"}, {"c3", sc.c3}}},
          {"s_grid", sc.s_grid},
          {"flow",
           {{"h_max", sc.h_max},
            {"h_rel", sc.h_rel},
            {"dt", sc.dt},
            {"dt_factor", sc.dt_factor},
            {"T", sc.T},
            {"snap_every", sc.snap_every},
            {"extra_times", sc.extra_times}}},
          {"expander", {{"tol", sc.expander_tol}, {"probe_seeds", sc.probe_seeds}}},
          {"checks",
           {{"hypotheses", c.hypotheses},
            {"density", c.density},
            {"white", c.white},
            {"huisken", c.huisken},
            {"alpha", c.alpha},
            {"graphical", c.graphical},
            {"x0_spacing", c.x0_spacing},
            {"x0_radius", c.x0_radius},
            {"max_times", c.max_times},
            {"huisken_centers", centers},
            {"huisken_t0", c.huisken_t0},
            {"huisken_r", c.huisken_r},
            {"alpha_T0", c.alpha_T0},
            {"p", c.p},
            {"eta_eps", c.eta_eps},
            {"theta_fracs", c.theta_fracs},
            {"closeness_eps", c.closeness_eps}}},
          {"seed", sc.seed},
          {"tolerance_version", sc.tolerance_version}};
}

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  sc.name = j.value("name", sc.name);
  sc.kind = j.value("kind", sc.kind);
  if (j.contains("line_pair")) {
    const auto& p = j.at("line_pair");
    sc.pair.phi1 = p.value("phi1", sc.pair.phi1);
    sc.pair.phi2 = p.value("phi2", sc.pair.phi2);
    sc.pair.pairing = p.value("pairing", sc.pair.pairing);
    sc.pair.alpha_min = p.value("alpha_min", sc.pair.alpha_min);
  }
  if (j.contains("init")) {
    const auto& in = j.at("init");
    std::string recipe = in.value("recipe", std::string("figure-eight"));
    if (recipe != "figure-eight") throw PipelineError("unknown initial-condition recipe '" + recipe + "'");
    sc.c3 = in.value("c3", sc.c3);
  }
  if (j.contains("s_grid")) {
    const auto& g = j.at("s_grid");
    sc.s_grid = g.is_string() ? parse_s_grid(g.get<std::string>()) : g.get<std::vector<double>>();
  } else {
    sc.s_grid = demo_scenario().s_grid;
  }
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    sc.h_max = f.value("h_max", sc.h_max);
    sc.h_rel = f.value("h_rel", sc.h_rel);
    sc.dt = f.value("dt", sc.dt);
    sc.dt_factor = f.value("dt_factor", sc.dt_factor);
    sc.T = f.value("T", sc.T);
    sc.snap_every = f.value("snap_every", sc.snap_every);
    sc.extra_times = f.value("extra_times", sc.extra_times);
  }
  if (j.contains("expander")) {
    sc.expander_tol = j.at("expander").value("tol", sc.expander_tol);
    sc.probe_seeds = j.at("expander").value("probe_seeds", sc.probe_seeds);
  }
  if (j.contains("checks")) {
    const auto& c = j.at("checks");
    auto& m = sc.checks;
    m.hypotheses = c.value("hypotheses", m.hypotheses);
    m.density = c.value("density", m.density);
    m.white = c.value("white", m.white);
    m.huisken = c.value("huisken", m.huisken);
    m.alpha = c.value("alpha", m.alpha);
    m.graphical = c.value("graphical", m.graphical);
    m.x0_spacing = c.value("x0_spacing", m.x0_spacing);
    m.x0_radius = c.value("x0_radius", m.x0_radius);
    m.max_times = c.value("max_times", m.max_times);
    if (c.contains("huisken_centers")) {
      m.huisken_centers.clear();
      for (const auto& p : c.at("huisken_centers")) m.huisken_centers.push_back(json_vec(p));
    }
    m.huisken_t0 = c.value("huisken_t0", m.huisken_t0);
    m.huisken_r = c.value("huisken_r", m.huisken_r);
    m.alpha_T0 = c.value("alpha_T0", m.alpha_T0);
    m.p = c.value("p", m.p);
    m.eta_eps = c.value("eta_eps", m.eta_eps);
    m.theta_fracs = c.value("theta_fracs", m.theta_fracs);
    m.closeness_eps = c.value("closeness_eps", m.closeness_eps);
  }
  sc.seed = j.value("seed", sc.seed);
  sc.tolerance_version = j.value("tolerance_version", sc.tolerance_version);
  return sc;
}

void validate(const Scenario& sc) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw PipelineError("invalid scenario: " + what);
  };
  need(!sc.name.empty(), "name is empty");
  need(sc.kind == "glued" || sc.kind == "expander", "kind must be 'glued' or 'expander'");
  validate(sc.pair);
  need(!(sc.kind == "glued" && sc.pair.straight()), "the glued construction needs two distinct lines");
  need(!sc.s_grid.empty(), "s-grid is empty");
  std::set<double> seen;
  for (double s : sc.s_grid) {
    need(std::isfinite(s) && s > 0 && s <= 1.0, "s-grid values must lie in (0, 1]");
    need(seen.insert(s).second, "s-grid values must be distinct");
  }
  need(sc.c3 > 0, "c3 must be positive");
  need(sc.h_max > 0 && sc.h_rel > 0, "h_max and h_rel must be positive");
  need(sc.dt >= 0 && sc.dt_factor > 0, "dt must be >= 0 and dt_factor positive");
  need(sc.T > 0 && sc.snap_every > 0, "T and snap_every must be positive");
  for (double t : sc.extra_times) need(t > 0 && t < sc.T, "extra snapshot times must lie in (0, T)");
  need(sc.expander_tol > 0, "expander tolerance must be positive");
  need(sc.probe_seeds >= 1, "probe_seeds must be at least 1");
  const auto& c = sc.checks;
  need(c.x0_spacing > 0 && c.x0_radius > 0 && c.max_times >= 2, "density grid must be positive");
  need(c.huisken_t0 > 0 && c.huisken_t0 <= sc.T, "huisken_t0 must lie in (0, T]");
  for (double r : c.huisken_r) need(r > 0, "huisken radii must be positive");
  need(c.alpha_T0 > sc.T, "alpha_T0 must exceed T");
  need(c.p > 0 && c.eta_eps > 0, "p and eta_eps must be positive");
  for (double th : c.theta_fracs) need(th > 0 && th < 1, "theta_fracs must lie in (0, 1)");
  need(c.closeness_eps > 0, "closeness_eps must be positive");
  tolerance_table(sc.tolerance_version);
}

std::string scenario_hash(const Scenario& sc) {
  std::string text = scenario_to_json(sc).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- artifacts

namespace {
json pair_json(const LinePair& p) {
  return {{"phi1", p.phi1}, {"phi2", p.phi2}, {"pairing", p.pairing}, {"alpha_min", p.alpha_min}};
}
LinePair pair_from(const json& j) {
  LinePair p;
  p.phi1 = j.at("phi1").get<double>();
  p.phi2 = j.at("phi2").get<double>();
  p.pairing = j.at("pairing").get<int>();
  p.alpha_min = j.value("alpha_min", p.alpha_min);
  return p;
}
}  // namespace

json arc_to_json(const ExpanderArc& arc) {
  const auto& c = arc.config;
  json table = {{"sigma", arc.sigma}, {"theta", arc.theta}, {"kappa", arc.kappa}};
  json xs = json::array(), ys = json::array();
  for (auto p : arc.x) xs.push_back(p.x), ys.push_back(p.y);
  table["x"] = std::move(xs);
  table["y"] = std::move(ys);
  return {{"pair", pair_json(arc.pair)},
          {"config",
           {{"tol", c.tol},
            {"r_cut", c.r_cut},
            {"table_ds", c.table_ds},
            {"ode_tol", c.ode_tol},
            {"max_newton", c.max_newton},
            {"graphical_margin", c.graphical_margin}}},
          {"sector", {{"a", arc.a}, {"b", arc.b}, {"omega", arc.omega}, {"straight", arc.straight}}},
          {"shot",
           {{"d", arc.shot.d},
            {"psi", arc.shot.psi},
            {"iterations", arc.shot.iterations},
            {"converged", arc.shot.converged},
            {"used_fallback", arc.shot.used_fallback},
            {"residual", arc.shot.residual}}},
          {"residual_sup", arc.residual_sup},
          {"residual_sup_fine", arc.residual_sup_fine},
          {"residual_l2", arc.residual_l2},
          {"decay",
           {{"b", arc.decay.b},
            {"C", arc.decay.C},
            {"quality", arc.decay.quality},
            {"exact", arc.decay.exact},
            {"samples", arc.decay.samples}}},
          {"r0", arc.r0},
          {"table", std::move(table)}};
}

ExpanderArc arc_from_json(const json& j) {
  LinePair p = pair_from(j.at("pair"));
  ExpanderConfig c;
  const auto& jc = j.at("config");
  c.tol = jc.at("tol").get<double>();
  c.r_cut = jc.at("r_cut").get<double>();
  c.table_ds = jc.at("table_ds").get<double>();
  c.ode_tol = jc.at("ode_tol").get<double>();
  c.max_newton = jc.at("max_newton").get<int>();
  c.graphical_margin = jc.at("graphical_margin").get<double>();
  ExpanderArc arc = expander_solve(p, c);
  double stored = j.at("residual_sup").get<double>();
  if (arc.residual_sup != stored || arc.shot.d != j.at("shot").at("d").get<double>())
    throw PipelineError("stored expander is not reproduced by the solver (residual " + std::to_string(stored) +
                        " vs " + std::to_string(arc.residual_sup) + ")");
  return arc;
}

json init_to_json(const SingularInitial& init) {
  return {{"recipe", "figure-eight"},
          {"pair", pair_json(init.pair)},
          {"c3", init.c3},
          {"x_graph", init.x_graph},
          {"r_cap", init.r_cap},
          {"blend", init.blend},
          {"frame", {{"a", init.frame.a}, {"omega", init.frame.omega}}}};
}

SingularInitial init_from_json(const json& j) {
  SingularInitial init = make_figure_eight(pair_from(j.at("pair")), j.at("c3").get<double>());
  init.c3 = j.at("c3").get<double>();
  init.x_graph = j.value("x_graph", init.x_graph);
  init.r_cap = j.value("r_cap", init.r_cap);
  init.blend = j.value("blend", init.blend);
  return init;
}

json glued_to_json(const GluedCurve& g) {
  json j = curve_to_json(g.curve);
  j["s"] = g.s;
  j["r0"] = g.r0;
  j["b"] = g.b;
  j["seam_jump_inner"] = g.seam_jump_inner;
  j["seam_jump_outer"] = g.seam_jump_outer;
  return j;
}

json hypotheses_to_json(const HypothesesReport& r) {
  auto worst = [](const WorstCase& w) { return json{{"value", w.value}, {"s", w.s}, {"where", vec_json(w.where)}}; };
  return {{"D1", r.D1},
          {"D2", r.D2},
          {"D3", r.D3},
          {"s_values", r.s_values},
          {"D1_per_s", r.D1_per_s},
          {"D2_per_s", r.D2_per_s},
          {"D3_per_s", r.D3_per_s},
          {"closeness_per_s", r.closeness_per_s},
          {"curvature_per_s", r.curvature_per_s},
          {"angle_sum_per_s", r.angle_sum_per_s},
          {"component_match", r.component_match},
          {"H1", {{"pass", r.h1}, {"worst", worst(r.h1_worst)}}},
          {"H2", {{"pass", r.h2}, {"worst", worst(r.h2_worst)}}},
          {"H3", {{"pass", r.h3}, {"worst", worst(r.h3_worst)}}},
          {"H4", {{"pass", r.h4}, {"worst", worst(r.h4_worst)}}},
          {"note", r.note},
          {"pass", r.all()}};
}

json certificate_to_json(const Certificate& c) {
  return {{"s0", c.s0},
          {"delta0", c.delta0},
          {"tau", c.tau},
          {"eps0", c.eps0},
          {"K0", c.K0},
          {"max_theta", c.max_theta},
          {"argmax", {{"s", c.argmax.s}, {"t", c.argmax.t}, {"r", c.argmax.r}, {"x0", vec_json(c.argmax.x0)}}},
          {"empty", c.empty},
          {"violation", c.violation},
          {"s_values", c.s_values},
          {"delta_per_tau", c.delta_per_tau},
          {"queries", c.queries},
          {"refused", c.refused}};
}

json snapshot_to_json(const FlowState& st) {
  json j = curve_to_json(st.curve);
  j["t"] = st.t;
  j["dt"] = st.dt;
  j["h_flow"] = st.h;
  j["cfl_ratio"] = st.cfl_ratio;
  j["resamples"] = st.resamples;
  j["theta"] = st.theta;
  j["beta"] = st.beta;
  j["theta_jump"] = st.theta_jump;
  j["beta_jump"] = st.beta_jump;
  json o = json::array();
  for (auto p : st.origin) o.push_back(vec_json(p));
  j["origin"] = std::move(o);
  j["material"] = st.material;
  j["kappa"] = st.fields.kappa;
  return j;
}

FlowState snapshot_from_json(const json& j) {
  FlowState st;
  st.curve = curve_from_json(j);
  st.t = j.at("t").get<double>();
  st.dt = j.at("dt").get<double>();
  st.h = j.at("h_flow").get<double>();
  st.cfl_ratio = j.value("cfl_ratio", 0.0);
  st.resamples = j.value("resamples", 0);
  st.theta = j.at("theta").get<std::vector<double>>();
  st.beta = j.at("beta").get<std::vector<double>>();
  st.theta_jump = j.at("theta_jump").get<double>();
  st.beta_jump = j.at("beta_jump").get<double>();
  for (const auto& p : j.at("origin")) st.origin.push_back(json_vec(p));
  st.material = j.at("material").get<std::vector<double>>();
  if (st.theta.size() != st.curve.size() || st.beta.size() != st.curve.size())
    throw PipelineError("snapshot fields do not match the vertex count");
  refresh_geometry(st);
  return st;
}

void write_run(const fs::path& dir, const FlowRun& run) {
  fs::create_directories(dir / "snapshots");
  json snaps = json::array();
  for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%04zu.json", k);
    write_json_file(dir / "snapshots" / name, snapshot_to_json(run.snapshots[k]));
    snaps.push_back({{"t", run.snapshots[k].t}, {"file", std::string("snapshots/") + name}});
  }
  json j = {{"s", run.s},
            {"config",
             {{"h", run.cfg.h},
              {"dt", run.cfg.dt},
              {"dt_factor", run.cfg.dt_factor},
              {"cfl", run.cfg.cfl},
              {"blowup", run.cfg.blowup},
              {"refine", run.cfg.refine},
              {"check_embedded", run.cfg.check_embedded},
              {"track_material", run.cfg.track_material}}},
            {"termination", to_string(run.reason)},
            {"detail", run.detail},
            {"steps", run.steps},
            {"end_time", run.end_time()},
            {"max_discrepancy_theta", run.max_discrepancy_theta},
            {"max_discrepancy_beta", run.max_discrepancy_beta},
            {"snapshots", std::move(snaps)}};
  write_json_file(dir / "run.json", j);
}

FlowRun read_run(const fs::path& dir) {
  json j = read_json_file(dir / "run.json");
  FlowRun run;
  run.s = j.at("s").get<double>();
  const auto& c = j.at("config");
  run.cfg.h = c.at("h").get<double>();
  run.cfg.dt = c.at("dt").get<double>();
  run.cfg.dt_factor = c.at("dt_factor").get<double>();
  run.cfg.cfl = c.at("cfl").get<double>();
  run.cfg.blowup = c.at("blowup").get<double>();
  run.cfg.refine = c.at("refine").get<bool>();
  run.cfg.check_embedded = c.at("check_embedded").get<bool>();
  run.cfg.track_material = c.at("track_material").get<bool>();
  std::string reason = j.at("termination").get<std::string>();
  if (reason == "time_reached") run.reason = Termination::TimeReached;
  else if (reason == "curvature_blowup") run.reason = Termination::CurvatureBlowup;
  else if (reason == "embeddedness_loss") run.reason = Termination::EmbeddednessLoss;
  else throw PipelineError("unknown termination '" + reason + "' in " + dir.string());
  run.detail = j.value("detail", std::string());
  run.steps = j.value("steps", 0);
  run.max_discrepancy_theta = j.value("max_discrepancy_theta", 0.0);
  run.max_discrepancy_beta = j.value("max_discrepancy_beta", 0.0);
  const auto& snaps = j.at("snapshots");
  run.snapshots.resize(snaps.size());
  parallel_for(snaps.size(), [&](std::size_t k) {
    run.snapshots[k] = snapshot_from_json(read_json_file(dir / snaps[k].at("file").get<std::string>()));
  });
  return run;
}

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  char buf[40];
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r[i]);
      if (i) out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------- manifest

const StageRecord* RunManifest::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

json manifest_to_json(const RunManifest& m) {
  json stages = json::array();
  for (const auto& s : m.stages)
    stages.push_back({{"name", s.name}, {"ran", s.ran}, {"pass", s.pass}, {"detail", s.detail}, {"outputs", s.outputs}});
  json runs = json::array();
  for (const auto& r : m.runs)
    runs.push_back({{"s", r.s}, {"dir", r.dir}, {"termination", r.termination}, {"end_time", r.end_time}});
  return {{"scenario_name", m.scenario_name},
          {"scenario_hash", m.scenario_hash},
          {"kind", m.kind},
          {"scenario", m.scenario},
          {"tolerance_version", m.tolerance_version},
          {"tolerances", m.tolerances},
          {"stages", stages},
          {"runs", runs},
          {"pass", m.pass},
          {"halted_at", m.halted_at},
          {"verifications", m.verifications}};
}

RunManifest read_manifest(const fs::path& file) {
  json j = read_json_file(file);
  RunManifest m;
  m.root = file.parent_path();
  m.scenario_name = j.at("scenario_name").get<std::string>();
  m.scenario_hash = j.at("scenario_hash").get<std::string>();
  m.kind = j.at("kind").get<std::string>();
  m.scenario = j.at("scenario");
  m.tolerance_version = j.at("tolerance_version").get<int>();
  m.tolerances = j.at("tolerances");
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.name = s.at("name").get<std::string>();
    r.ran = s.at("ran").get<bool>();
    r.pass = s.at("pass").get<bool>();
    r.detail = s.at("detail").get<std::string>();
    r.outputs = s.at("outputs").get<std::vector<std::string>>();
    m.stages.push_back(std::move(r));
  }
  for (const auto& r : j.at("runs"))
    m.runs.push_back({r.at("s").get<double>(), r.at("dir").get<std::string>(), r.at("termination").get<std::string>(),
                      r.at("end_time").get<double>()});
  m.pass = j.at("pass").get<bool>();
  m.halted_at = j.at("halted_at").get<std::string>();
  m.verifications = j.value("verifications", json::array());
  return m;
}

void write_manifest(const RunManifest& m) { write_json_file(m.root / "manifest.json", manifest_to_json(m)); }

// ---------------------------------------------------------------- stages

namespace {

struct Outcome {
  json report;
  bool pass = true;
  std::string detail;
  std::vector<std::pair<std::string, std::string>> files;  // extra text outputs (CSV)
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Outcome expander_outcome(const ExpanderArc& arc, const UniquenessProbe& probe, const Scenario& sc,
                         const ToleranceTable& tol) {
  Outcome o;
  std::vector<std::string> bad;
  if (!(arc.residual_sup <= tol.expander_residual)) bad.push_back("residual " + fmt(arc.residual_sup));
  if (!arc.straight && !(arc.decay.b > 0 && arc.decay.quality >= tol.decay_quality))
    bad.push_back("decay fit b " + fmt(arc.decay.b) + " quality " + fmt(arc.decay.quality));
  if (probe.converged != probe.seeds || !(probe.max_hausdorff <= tol.uniqueness))
    bad.push_back("multi-start " + std::to_string(probe.converged) + "/" + std::to_string(probe.seeds) +
                  " spread " + fmt(probe.max_hausdorff));
  o.pass = bad.empty();
  o.detail = o.pass ? "residual " + fmt(arc.residual_sup) : join(bad);
  o.report = {{"tolerance_version", tol.version},
              {"residual_sup", arc.residual_sup},
              {"residual_l2", arc.residual_l2},
              {"decay", {{"b", arc.decay.b}, {"quality", arc.decay.quality}, {"exact", arc.decay.exact}}},
              {"r0", arc.r0},
              {"probe",
               {{"seeds", probe.seeds},
                {"seed", sc.seed},
                {"converged", probe.converged},
                {"fallbacks", probe.fallbacks},
                {"max_hausdorff", probe.max_hausdorff}}},
              {"pass", o.pass}};
  return o;
}

Outcome glue_outcome(const std::vector<GluedCurve>& fam, const std::vector<std::string>& files,
                     const ToleranceTable& tol) {
  Outcome o;
  json rows = json::array();
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const auto& g = fam[i];
    bool emb = check_embedded(g.curve).embedded;
    double jump = std::max(g.seam_jump_inner, g.seam_jump_outer);
    if (!emb) bad.push_back("s " + fmt(g.s) + " not embedded");
    if (!(jump <= tol.seam_jump)) bad.push_back("s " + fmt(g.s) + " seam jump " + fmt(jump));
    rows.push_back({{"s", g.s},
                    {"file", files[i]},
                    {"vertices", g.curve.size()},
                    {"h", g.curve.h},
                    {"seam_jump_inner", g.seam_jump_inner},
                    {"seam_jump_outer", g.seam_jump_outer},
                    {"embedded", emb}});
  }
  o.pass = bad.empty();
  o.detail = o.pass ? std::to_string(fam.size()) + " curves" : join(bad);
  o.report = {{"tolerance_version", tol.version}, {"curves", rows}, {"pass", o.pass}};
  return o;
}

Outcome hypotheses_outcome(const SingularInitial& init, const ExpanderArc& arc, const std::vector<GluedCurve>& fam,
                           const ToleranceTable& tol) {
  HypothesesOptions opt;
  opt.uniform_factor = tol.uniform_factor;
  auto r = check_hypotheses(init, arc, fam, opt);
  Outcome o;
  o.report = hypotheses_to_json(r);
  o.report["tolerance_version"] = tol.version;
  o.pass = r.all();
  o.detail = o.pass ? "H1-H4 hold" : "failed:" + std::string(r.h1 ? "" : " H1") + (r.h2 ? "" : " H2") +
                                         (r.h3 ? "" : " H3") + (r.h4 ? "" : " H4") + (r.note.empty() ? "" : "; " + r.note);
  return o;
}

Outcome flow_outcome(const std::vector<FlowRun>& runs, const std::vector<RunEntry>& entries, bool glued,
                     const ToleranceTable& tol) {
  Outcome o;
  json rows = json::array();
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    rows.push_back({{"s", r.s},
                    {"dir", entries[i].dir},
                    {"h", r.cfg.h},
                    {"dt", flow_dt(r.cfg)},
                    {"termination", to_string(r.reason)},
                    {"detail", r.detail},
                    {"end_time", r.end_time()},
                    {"steps", r.steps},
                    {"snapshots", r.snapshots.size()}});
    if (r.reason != Termination::TimeReached)
      bad.push_back("s " + fmt(r.s) + ": " + to_string(r.reason) + " (" + r.detail + ")");
  }
  o.pass = bad.empty();
  o.detail = o.pass ? std::to_string(runs.size()) + " runs reached T" : join(bad);
  o.report = {{"tolerance_version", tol.version},
              {"method", glued ? "semi-implicit" : "self-similar"},
              {"runs", rows},
              {"pass", o.pass}};
  return o;
}

// the run restricted to the regular snapshot schedule
FlowRun schedule_view(const FlowRun& run, double every, double T) {
  FlowRun v = run;
  v.snapshots.clear();
  for (const auto& st : run.snapshots) {
    double k = st.t / every;
    if (std::abs(k - std::round(k)) < 1e-9 || std::abs(st.t - T) < 1e-12) v.snapshots.push_back(st);
  }
  return v;
}

Outcome density_outcome(const std::vector<FlowRun>& all_runs, const Scenario& sc, const ToleranceTable& tol) {
  Outcome o;
  std::vector<FlowRun> runs;
  for (const auto& r : all_runs) runs.push_back(schedule_view(r, sc.snap_every, sc.T));
  SweepGrid g;
  g.eps0 = tol.eps0;
  g.x0_spacing = sc.checks.x0_spacing;
  g.x0_radius = sc.checks.x0_radius;
  g.max_times = sc.checks.max_times;
  std::vector<const FlowRun*> ptr;
  for (const auto& r : runs) ptr.push_back(&r);
  Certificate cert = density_sweep(ptr, g);
  o.report = {{"tolerance_version", tol.version}, {"certificate", certificate_to_json(cert)}};
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < g.tau.size() && k < cert.delta_per_tau.size(); ++k)
    rows.push_back({g.tau[k], cert.delta_per_tau[k]});
  o.files.push_back({"density/sweep.csv", to_csv({"tau", "delta0"}, rows)});
  if (cert.empty) {
    o.pass = false;
    o.detail = "empty certificate: " + cert.violation;
    o.report["pass"] = false;
    return o;
  }
  o.detail = "s0 " + fmt(cert.s0) + " delta0 " + fmt(cert.delta0) + " tau " + fmt(cert.tau);
  if (sc.checks.white) {
    json w = json::array();
    std::vector<double> C;
    std::vector<std::vector<double>> wrows;
    for (const auto& r : runs) {
      if (r.s > cert.s0) continue;
      auto res = white_check(r, cert);
      C.push_back(res.C_emp);
      w.push_back({{"s", r.s}, {"C_emp", res.C_emp}, {"t", res.t}, {"where", vec_json(res.where)}});
      wrows.push_back({r.s, res.C_emp, res.t, res.where.x, res.where.y});
    }
    double ratio = uniformity_ratio(C);
    bool ok = std::isfinite(ratio) && ratio <= tol.white_factor;
    o.report["white"] = {{"runs", w}, {"ratio", ratio}, {"factor", tol.white_factor}, {"pass", ok}};
    o.files.push_back({"density/white.csv", to_csv({"s", "C_emp", "t", "x", "y"}, wrows)});
    o.detail += "; white ratio " + fmt(ratio);
    o.pass = ok;
  }
  o.report["pass"] = o.pass;
  return o;
}

double step_scale(const FlowRun& r) {
  double dt = r.snapshots.empty() ? flow_dt(r.cfg) : r.snapshots.front().dt;
  return r.cfg.h * r.cfg.h + dt;
}

Outcome monotone_outcome(const std::vector<FlowRun>& runs, const Scenario& sc, const ToleranceTable& tol) {
  Outcome o;
  json per = json::array();
  std::vector<std::string> bad;
  std::vector<std::vector<double>> arows, hrows;
  for (const auto& run : runs) {
    json entry = {{"s", run.s}};
    double sc_h = step_scale(run);
    if (sc.checks.alpha) {
      try {
        auto a = alpha_monotonicity_check(run, 0.0, run.end_time(), sc.checks.alpha_T0, tol.alpha_factor * sc_h);
        entry["alpha"] = {{"C", a.C},       {"T0", a.T0},
                          {"slack", a.slack}, {"max_excess", a.max_excess},
                          {"max_scale", a.max_scale}, {"rows", a.rows.size()},
                          {"holds", a.holds}};
        for (const auto& row : a.rows) arows.push_back({run.s, row.t, row.lhs, row.rhs, row.excess});
        if (!a.holds) bad.push_back("alpha inequality fails at s " + fmt(run.s));
      } catch (const std::exception& e) {
        entry["alpha"] = {{"error", e.what()}};
        bad.push_back("alpha at s " + fmt(run.s) + ": " + e.what());
      }
    }
    if (sc.checks.huisken) {
      json hs = json::array();
      for (auto x0 : sc.checks.huisken_centers) {
        try {
          auto h = huisken_check(run, x0, sc.checks.huisken_t0, sc.checks.huisken_r,
                                 tol.huisken_base + tol.huisken_factor * sc_h);
          hs.push_back({{"x0", vec_json(x0)},
                        {"t0", sc.checks.huisken_t0},
                        {"r", h.r},
                        {"theta", h.theta},
                        {"monotone", h.monotone},
                        {"max_violation", h.max_violation},
                        {"slack", h.slack},
                        {"max_residual", h.max_residual},
                        {"max_rhs", h.max_rhs}});
          for (const auto& row : h.rows) hrows.push_back({run.s, x0.x, x0.y, row.t, row.lhs, row.rhs, row.residual});
          if (!h.monotone) bad.push_back("density not monotone at s " + fmt(run.s));
        } catch (const std::exception& e) {
          hs.push_back({{"x0", vec_json(x0)}, {"error", e.what()}});
          bad.push_back("huisken at s " + fmt(run.s) + ": " + e.what());
        }
      }
      entry["huisken"] = hs;
    }
    per.push_back(entry);
  }
  o.pass = bad.empty();
  o.detail = o.pass ? "alpha and density monotonicity hold on " + std::to_string(runs.size()) + " runs" : join(bad);
  o.report = {{"tolerance_version", tol.version}, {"runs", per}, {"pass", o.pass}};
  o.files.push_back({"monotone/alpha.csv", to_csv({"s", "t", "lhs", "rhs", "excess"}, arows)});
  o.files.push_back({"monotone/huisken.csv", to_csv({"s", "x0", "y0", "t", "lhs", "rhs", "residual"}, hrows)});
  return o;
}

Vec2 nearest_vertex(const PolyCurve& c, Vec2 y) {
  Vec2 best = c.vertices.front();
  double bd = std::numeric_limits<double>::infinity();
  for (auto v : c.vertices) {
    double d = norm(v - y);
    if (d < bd) bd = d, best = v;
  }
  return best;
}

Outcome graphical_outcome(const std::vector<FlowRun>& runs, const SingularInitial& init, const ExpanderArc& arc,
                          const Scenario& sc, const ToleranceTable& tol) {
  Outcome o;
  auto family = circle_calibration_family();
  double c = calibrate_interior_constant(family);
  auto sigma = expander_pair(arc, 0.01);
  const auto& ch = sc.checks;
  std::vector<std::string> bad;
  json per = json::array();
  std::vector<std::vector<double>> prow;
  std::vector<double> q1s;
  std::vector<double> persist;
  int conforming = 0, excluded = 0;
  for (const auto& run : runs) {
    json entry = {{"s", run.s}};
    double rs = std::pow(run.s, 0.25), R = 0.5 * rs;
    double Tw = std::min(run.s, run.end_time());
    const auto& c0 = run.snapshots.front().curve;
    json patches = json::array();
    for (int k = 0; k < 4; ++k) {
      Vec2 y0 = nearest_vertex(c0, unit(init.frame.angle(k)) * (1.5 * rs));
      json p = {{"ray", k}, {"center", vec_json(y0)}, {"R", R}, {"T", Tw}};
      try {
        auto e = eta_evolution_check(run, y0, R, ch.p, ch.eta_eps, tol.eta_factor * step_scale(run), Tw);
        p["eta"] = {{"holds", e.holds}, {"min_residual", e.min_residual}, {"slack", e.slack}, {"samples", e.samples}};
        if (!e.holds) bad.push_back("eta inequality fails at s " + fmt(run.s) + " ray " + std::to_string(k));
      } catch (const GraphicalError& e) {
        p["eta"] = {{"conforming", false}, {"reason", e.what()}};
      }
      json rows = json::array();
      for (double th : ch.theta_fracs) {
        try {
          auto r = interior_estimate_check(run, y0, R, th, c, ch.p, Tw, ch.eta_eps);
          rows.push_back({{"theta_frac", th},
                          {"lhs", r.lhs},
                          {"bound_c", r.bound_c},
                          {"bound_initial", r.bound_initial},
                          {"rhs", r.rhs},
                          {"required_c", r.required_c},
                          {"max_det", r.max_det},
                          {"hypothesis_ok", r.hypothesis_ok},
                          {"pass", r.pass}});
          prow.push_back({run.s, double(k), th, r.lhs, r.rhs, r.required_c, r.max_det, r.hypothesis_ok ? 1.0 : 0.0,
                          r.pass ? 1.0 : 0.0});
          if (r.hypothesis_ok) {
            ++conforming;
            if (!r.pass)
              bad.push_back("interior estimate fails at s " + fmt(run.s) + " ray " + std::to_string(k) + " theta " +
                            fmt(th) + " (needs c " + fmt(r.required_c) + ")");
          } else {
            ++excluded;
          }
        } catch (const GraphicalError& e) {
          ++excluded;
          rows.push_back({{"theta_frac", th}, {"conforming", false}, {"reason", e.what()}});
        }
      }
      p["interior"] = rows;
      try {
        std::vector<double> grid;
        for (double f : {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}) grid.push_back(f * R);
        auto pr = graphical_persistence_check(run, y0, grid, 0.5, 0.5, R);
        p["persistence"] = {{"eps", pr.eps}, {"eta", pr.eta}, {"delta", pr.delta}, {"limited_by_run", pr.limited_by_run}};
        persist.push_back(pr.delta / R);
      } catch (const GraphicalError& e) {
        p["persistence"] = {{"conforming", false}, {"reason", e.what()}};
      }
      patches.push_back(p);
    }
    entry["patches"] = patches;
    DensityBoundOptions dopt;
    dopt.eps0 = tol.eps0;
    dopt.scale = std::sqrt(2.0 * run.s);
    try {
      auto d = c1alpha_density_bound(run, sigma, ch.closeness_eps, dopt);
      entry["density_bound"] = {{"close", true},
                                {"q1", d.q1},
                                {"max_theta", d.max_theta},
                                {"argmax", {{"y", vec_json(d.argmax_y)}, {"r", d.argmax_r}, {"t", d.argmax_t}}},
                                {"limited_by_run", d.limited_by_run},
                                {"first_violation", d.first_violation},
                                {"queries", d.queries}};
      q1s.push_back(d.q1);
    } catch (const GraphicalError& e) {
      entry["density_bound"] = {{"close", false}, {"reason", e.what()}};
    }
    per.push_back(entry);
  }
  double q1_ratio = q1s.empty() ? std::numeric_limits<double>::infinity() : uniformity_ratio(q1s);
  bool q1_ok = !q1s.empty() && q1_ratio <= tol.uniform_factor;
  if (!q1_ok) bad.push_back(q1s.empty() ? "no run is close to the expander pair" : "q1 ratio " + fmt(q1_ratio));
  o.pass = bad.empty();
  o.detail = o.pass ? "c " + fmt(c) + ", " + std::to_string(conforming) + " conforming patches" : join(bad);
  o.report = {{"tolerance_version", tol.version},
              {"calibration", {{"family", "shrinking circles"}, {"reports", family.size()}, {"c", c}}},
              {"runs", per},
              {"conforming_patches", conforming},
              {"excluded_patches", excluded},
              {"q1", {{"values", q1s}, {"ratio", q1_ratio}, {"pass", q1_ok}}},
              {"persistence_delta_over_R", persist},
              {"pass", o.pass}};
  o.files.push_back({"graphical/patches.csv", to_csv({"s", "ray", "theta_frac", "lhs", "rhs", "required_c",
                                                      "max_det", "hypothesis_ok", "pass"},
                                                     prow)});
  return o;
}

void log_line(std::ostream* log, const std::string& text) {
  if (log) *log << text << std::endl;
}

std::vector<double> sorted_grid(const Scenario& sc) {
  auto g = sc.s_grid;
  std::sort(g.begin(), g.end(), std::greater<>());
  return g;
}

EvolveOptions evolve_options(const Scenario& sc, double s) {
  EvolveOptions o;
  o.T = sc.T;
  o.snap_every = sc.snap_every;
  o.s = s;
  o.extra_times = sc.extra_times;
  for (int k = 1; k <= 10; ++k)
    if (k * s / 10 < sc.T) o.extra_times.push_back(k * s / 10);
  return o;
}

// snapshots of sqrt(2(s + t)) Sigma on the flow's schedule
FlowRun self_similar_run(const ExpanderArc& arc, const Scenario& sc, double s) {
  FlowRun run;
  run.s = s;
  run.cfg = sc.flow_config(s);
  auto o = evolve_options(sc, s);
  std::vector<double> times = {0.0};
  for (int k = 1; k * sc.snap_every < sc.T - 1e-12; ++k) times.push_back(k * sc.snap_every);
  times.push_back(sc.T);
  for (double t : o.extra_times) times.push_back(t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              times.end());
  for (double t : times) {
    FlowState st = initial_state(expander_flow(arc.curve(run.cfg.h / std::sqrt(2.0 * (s + t))), s + t), run.cfg);
    st.t = t;
    run.snapshots.push_back(std::move(st));
  }
  run.detail = "self-similar";
  return run;
}

struct Loaded {
  ExpanderArc arc;
  SingularInitial init;
  std::vector<GluedCurve> glued;
  std::vector<FlowRun> runs;
};

std::vector<GluedCurve> glue_family(const SingularInitial& init, const ExpanderArc& arc, const Scenario& sc) {
  auto grid = sorted_grid(sc);
  std::vector<GluedCurve> fam(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    GluingConfig gc;
    gc.s = grid[i];
    gc.h = sc.h_for(grid[i]);
    validate(gc, arc);
  }
  parallel_for(grid.size(), [&](std::size_t i) {
    GluingConfig gc;
    gc.s = grid[i];
    gc.h = sc.h_for(grid[i]);
    fam[i] = glue(init, arc, gc);
  });
  return fam;
}

}  // namespace

RunManifest run_pipeline(const Scenario& sc, const fs::path& out_dir, std::ostream* log) {
  validate(sc);
  const ToleranceTable tol = tolerance_table(sc.tolerance_version);
  const bool glued = sc.kind == "glued";
  RunManifest m;
  m.root = out_dir;
  m.scenario_name = sc.name;
  m.scenario_hash = scenario_hash(sc);
  m.kind = sc.kind;
  m.scenario = scenario_to_json(sc);
  m.tolerance_version = tol.version;
  m.tolerances = to_json(tol);
  fs::create_directories(out_dir);
  write_json_file(out_dir / "scenario.json", m.scenario);

  Loaded L;
  bool halted = false;
  auto stage = [&](const std::string& name, bool applicable, const std::function<Outcome(StageRecord&)>& fn) {
    StageRecord rec;
    rec.name = name;
    if (halted) {
      rec.detail = "not run: halted at " + m.halted_at;
    } else if (!applicable) {
      rec.pass = true;
      rec.detail = "not applicable";
    } else {
      log_line(log, "[" + name + "] running");
      rec.ran = true;
      try {
        Outcome o = fn(rec);
        rec.pass = o.pass;
        rec.detail = o.detail;
        std::string report = name + "/report.json";
        write_json_file(out_dir / report, o.report);
        rec.outputs.push_back(report);
        for (const auto& [path, text] : o.files) {
          write_text_file(out_dir / path, text);
          rec.outputs.push_back(path);
        }
      } catch (const std::exception& e) {
        rec.pass = false;
        rec.detail = e.what();
      }
      log_line(log, "[" + name + "] " + (rec.pass ? "pass: " : "FAIL: ") + rec.detail);
      if (!rec.pass) {
        halted = true;
        m.halted_at = name;
      }
    }
    m.stages.push_back(rec);
    write_manifest(m);
  };

  stage("expander", true, [&](StageRecord& rec) {
    ExpanderConfig cfg;
    cfg.tol = sc.expander_tol;
    L.arc = expander_solve(sc.pair, cfg);
    write_json_file(out_dir / "expander/arc.json", arc_to_json(L.arc));
    rec.outputs.push_back("expander/arc.json");
    auto probe = multi_start_probe(sc.pair, cfg, sc.probe_seeds, sc.seed);
    return expander_outcome(L.arc, probe, sc, tol);
  });
  stage("glue", glued, [&](StageRecord& rec) {
    L.init = make_figure_eight(sc.pair, sc.c3);
    write_json_file(out_dir / "glue/init.json", init_to_json(L.init));
    rec.outputs.push_back("glue/init.json");
    L.glued = glue_family(L.init, L.arc, sc);
    std::vector<std::string> files;
    for (const auto& g : L.glued) {
      std::string f = "glue/L_" + dyadic_name(g.s) + ".json";
      write_json_file(out_dir / f, glued_to_json(g));
      files.push_back(f);
      rec.outputs.push_back(f);
    }
    return glue_outcome(L.glued, files, tol);
  });
  stage("hypotheses", glued && sc.checks.hypotheses,
        [&](StageRecord&) { return hypotheses_outcome(L.init, L.arc, L.glued, tol); });
  stage("flow", true, [&](StageRecord& rec) {
    auto grid = sorted_grid(sc);
    std::vector<FlowRun> runs(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
      runs[i] = glued ? evolve(L.glued[i].curve, sc.flow_config(grid[i]), evolve_options(sc, grid[i]))
                      : self_similar_run(L.arc, sc, grid[i]);
    });
    for (const auto& r : runs) {
      std::string dir = "runs/" + dyadic_name(r.s);
      write_run(out_dir / dir, r);
      rec.outputs.push_back(dir);
      m.runs.push_back({r.s, dir, to_string(r.reason), r.end_time()});
    }
    runs.clear();
    // checks read the stored runs, exactly as re-verification will
    L.runs.resize(m.runs.size());
    for (std::size_t i = 0; i < m.runs.size(); ++i) L.runs[i] = read_run(out_dir / m.runs[i].dir);
    return flow_outcome(L.runs, m.runs, glued, tol);
  });
  stage("density", glued && sc.checks.density, [&](StageRecord&) { return density_outcome(L.runs, sc, tol); });
  stage("monotone", glued && (sc.checks.alpha || sc.checks.huisken),
        [&](StageRecord&) { return monotone_outcome(L.runs, sc, tol); });
  stage("graphical", glued && sc.checks.graphical,
        [&](StageRecord&) { return graphical_outcome(L.runs, L.init, L.arc, sc, tol); });

  m.pass = !halted;
  write_manifest(m);
  return m;
}

json verify_manifest(const fs::path& manifest_file, std::ostream* log) {
  RunManifest m = read_manifest(manifest_file);
  Scenario sc = scenario_from_json(m.scenario);
  const ToleranceTable tol = tolerance_table(m.tolerance_version);
  json stages = json::array();
  bool all = true;
  Loaded L;
  bool have_arc = false, have_runs = false, have_glue = false;

  auto compare = [&](const std::string& name, const Outcome& o) {
    bool same = read_text(m.root / (name + "/report.json")) == dumped(o.report);
    for (const auto& [path, text] : o.files) same = same && read_text(m.root / path) == text;
    return same;
  };
  if (scenario_hash(sc) != m.scenario_hash) throw PipelineError("scenario hash mismatch");

  for (const auto& rec : m.stages) {
    if (!rec.ran) continue;
    json row = {{"name", rec.name}};
    bool pass = false, reproduced = false;
    std::string detail;
    try {
      if (rec.name == "expander") {
        L.arc = arc_from_json(read_json_file(m.root / "expander/arc.json"));
        have_arc = true;
        ExpanderConfig cfg = L.arc.config;
        auto o = expander_outcome(L.arc, multi_start_probe(sc.pair, cfg, sc.probe_seeds, sc.seed), sc, tol);
        pass = o.pass;
        reproduced = compare(rec.name, o);
      } else if (rec.name == "glue") {
        if (!have_arc) throw PipelineError("expander not available");
        L.init = init_from_json(read_json_file(m.root / "glue/init.json"));
        L.glued = glue_family(L.init, L.arc, sc);
        have_glue = true;
        std::vector<std::string> files;
        reproduced = true;
        for (const auto& g : L.glued) {
          std::string f = "glue/L_" + dyadic_name(g.s) + ".json";
          files.push_back(f);
          reproduced = reproduced && read_text(m.root / f) == dumped(glued_to_json(g));
        }
        auto o = glue_outcome(L.glued, files, tol);
        pass = o.pass;
        reproduced = reproduced && compare(rec.name, o);
      } else if (rec.name == "hypotheses") {
        if (!have_glue) throw PipelineError("glued family not available");
        auto o = hypotheses_outcome(L.init, L.arc, L.glued, tol);
        pass = o.pass;
        reproduced = compare(rec.name, o);
      } else if (rec.name == "flow") {
        reproduced = true;
        for (const auto& r : m.runs) {
          L.runs.push_back(read_run(m.root / r.dir));
          const auto& run = L.runs.back();
          reproduced = reproduced && to_string(run.reason) == r.termination && run.end_time() == r.end_time;
        }
        have_runs = true;
        auto o = flow_outcome(L.runs, m.runs, sc.kind == "glued", tol);
        pass = o.pass;
        reproduced = reproduced && compare(rec.name, o);
      } else if (rec.name == "density" || rec.name == "monotone" || rec.name == "graphical") {
        if (!have_runs) throw PipelineError("runs not available");
        Outcome o = rec.name == "density"    ? density_outcome(L.runs, sc, tol)
                    : rec.name == "monotone" ? monotone_outcome(L.runs, sc, tol)
                                             : graphical_outcome(L.runs, L.init, L.arc, sc, tol);
        pass = o.pass;
        reproduced = compare(rec.name, o);
      }
    } catch (const std::exception& e) {
      detail = e.what();
    }
    row["pass"] = pass;
    row["reproduced"] = reproduced;
    row["recorded_pass"] = rec.pass;
    if (!detail.empty()) row["error"] = detail;
    log_line(log, "[verify " + rec.name + "] " + (pass ? "pass" : "FAIL") + (reproduced ? ", reproduced" : ", DIFFERS") +
                      (detail.empty() ? "" : ": " + detail));
    all = all && pass && reproduced;
    stages.push_back(row);
  }
  bool complete = m.halted_at.empty();
  json v = {{"index", m.verifications.size()},
            {"scenario_hash", m.scenario_hash},
            {"tolerance_version", tol.version},
            {"stages", stages},
            {"complete", complete},
            {"pass", all && complete}};
  m.verifications.push_back(v);
  write_manifest(m);
  return v;
}

// ---------------------------------------------------------------- limit study

double hausdorff_outside(const std::vector<PolyCurve>& a, const std::vector<PolyCurve>& b, double delta) {
  auto one_sided = [delta](const std::vector<PolyCurve>& from, const std::vector<PolyCurve>& to) {
    std::vector<SegmentGrid> grids;
    for (const auto& c : to) grids.emplace_back(c, std::max(1e-6, 4.0 * c.h));
    double worst = 0;
    for (const auto& c : from) {
      const std::size_t n = c.size();
      for (std::size_t i = 0; i < n; ++i) {
        for (int half = 0; half < 2; ++half) {
          if (half && !(i + 1 < n || c.closed())) continue;
          Vec2 p = half ? 0.5 * (c.vertices[i] + c.vertices[(i + 1) % n]) : c.vertices[i];
          if (norm(p) < delta) continue;
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < to.size(); ++k) {
            best = std::min(best, grids[k].nearest(p));
            const auto& q = to[k];
            if (!q.closed()) {
              best = std::min(best, point_ray_distance(p, q.vertices.front(), unit(q.rays[0].angle)));
              best = std::min(best, point_ray_distance(p, q.vertices.back(), unit(q.rays[1].angle)));
            }
          }
          worst = std::max(worst, best);
        }
      }
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

namespace {
const FlowState& snapshot_at(const FlowRun& run, double t) {
  for (const auto& st : run.snapshots)
    if (std::abs(st.t - t) <= 1e-12 * std::max(1.0, t)) return st;
  throw PipelineError("run s = " + fmt(run.s) + " has no snapshot at t = " + fmt(t));
}

// the cone the construction desingularizes: the two paired rays joined at the origin
PolyCurve corner_of(const ExpanderArc& arc, double R, double h) {
  PolyCurve c;
  c.topology = Topology::OpenArc;
  c.h = h;
  Vec2 ea = unit(arc.a), eb = unit(arc.b);
  int n = static_cast<int>(std::ceil(R / h));
  for (int i = n; i >= 1; --i) c.vertices.push_back(ea * (R * i / n));
  c.vertices.push_back({0.0, 0.0});
  for (int i = 1; i <= n; ++i) c.vertices.push_back(eb * (R * i / n));
  c.rays = {{arc.a, 1.0}, {arc.b, 1.0}};
  return c;
}
}  // namespace

LimitStudy limit_study(const RunManifest& m, const LimitOptions& opt) {
  Scenario sc = scenario_from_json(m.scenario);
  if (m.runs.size() < 3) throw PipelineError("the limit study needs at least three values of s");
  LimitStudy out;
  out.t_star = opt.t_star < 0 ? sc.T : opt.t_star;
  out.delta = opt.delta;
  out.t_probe = opt.t_probe;
  for (const auto& r : m.runs)
    if (r.end_time < out.t_star - 1e-12)
      throw PipelineError("run s = " + fmt(r.s) + " terminated at " + fmt(r.end_time) + " (" + r.termination +
                          ") before t* = " + fmt(out.t_star));
  std::vector<RunEntry> entries = m.runs;
  std::sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) { return a.s > b.s; });
  std::vector<FlowRun> runs;
  for (const auto& e : entries) runs.push_back(read_run(m.root / e.dir));

  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    const auto& a = snapshot_at(runs[i], out.t_star).curve;
    const auto& b = snapshot_at(runs[i + 1], out.t_star).curve;
    out.cauchy.push_back({runs[i].s, runs[i + 1].s, hausdorff(a, b).value});
  }
  out.decreasing = true;
  for (std::size_t i = 1; i < out.cauchy.size(); ++i)
    out.decreasing = out.decreasing && out.cauchy[i].distance < out.cauchy[i - 1].distance;

  const FlowRun& small = runs.back();
  out.s_small = small.s;
  std::vector<PolyCurve> target;
  if (m.kind == "glued") {
    auto init = init_from_json(read_json_file(m.root / "glue/init.json"));
    target.push_back(init.curve(0.002));
  } else {
    auto arc = arc_from_json(read_json_file(m.root / "expander/arc.json"));
    double R = 0;
    for (const auto& st : small.snapshots)
      for (auto v : st.curve.vertices) R = std::max(R, norm(v));
    target.push_back(corner_of(arc, R + 1.0, 0.002));
  }
  bool found = false;
  for (const auto& st : small.snapshots) {
    if (st.t > opt.t_max + 1e-12) break;
    double d = hausdorff_outside({st.curve}, target, opt.delta);
    out.attainment.push_back({st.t, d});
    if (std::abs(st.t - opt.t_probe) <= 1e-12 * std::max(1.0, opt.t_probe)) {
      out.distance_at_probe = d;
      found = true;
    }
  }
  if (!found) throw PipelineError("run s = " + fmt(small.s) + " has no snapshot at t = " + fmt(opt.t_probe));
  out.attained = out.distance_at_probe <= opt.tolerance;
  out.pass = out.decreasing && out.attained;
  return out;
}

json limit_to_json(const LimitStudy& l) {
  json c = json::array(), a = json::array();
  for (const auto& r : l.cauchy) c.push_back({{"s_a", r.s_a}, {"s_b", r.s_b}, {"distance", r.distance}});
  for (const auto& r : l.attainment) a.push_back({{"t", r.t}, {"distance", r.distance}});
  return {{"t_star", l.t_star},
          {"cauchy", c},
          {"decreasing", l.decreasing},
          {"s_small", l.s_small},
          {"delta", l.delta},
          {"attainment", a},
          {"t_probe", l.t_probe},
          {"distance_at_probe", l.distance_at_probe},
          {"attained", l.attained},
          {"pass", l.pass}};
}

}  // namespace lmcf
