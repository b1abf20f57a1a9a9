#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/density.hpp"
#include "lmcf/expander.hpp"
#include "lmcf/flow.hpp"
#include "lmcf/gluing.hpp"
#include "lmcf/graphical.hpp"
#include "lmcf/io.hpp"
#include "lmcf/monotone.hpp"

namespace lmcf {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ToleranceTable {
  int version = 1;
  double expander_residual = 1e-8;
  double uniqueness = 1e-6;       // multi-start Hausdorff agreement
  double decay_quality = 0.99;
  double seam_jump = 1e-6;        // radians
  double uniform_factor = 2.0;    // constants across the s-grid
  double eps0 = 0.05;
  double white_factor = 2.0;
  double huisken_base = 1e-6, huisken_factor = 5.0;  // base + factor (h^2 + dt)
  double alpha_factor = 20.0;     // factor (h^2 + dt)
  double eta_factor = 20.0;       // factor (h^2 + dt)
  double rescaling = 1e-12;       // relative
  double closed_form = 1e-6;
  double limit_distance = 5e-3;
  double limit_ball = 0.2;
  double limit_time = 1e-4;
};
// throws PipelineError for unknown versions
ToleranceTable tolerance_table(int version);
json to_json(const ToleranceTable& t);

struct VerificationMatrix {
  bool hypotheses = true, density = true, white = true, huisken = true, alpha = true, graphical = true;
  double x0_spacing = 0.1, x0_radius = 1.0;
  int max_times = 12;
  std::vector<Vec2> huisken_centers = {{0.0, 0.0}, {0.5, 0.5}};
  double huisken_t0 = 0.2;
  std::vector<double> huisken_r = {0.2, 0.25, 0.3, 0.35, 0.4};  // r^2 / 8 must cover the snapshot cadence
  double alpha_T0 = 1.0;
  double p = 2.0, eta_eps = 0.2;
  std::vector<double> theta_fracs = {0.25, 0.5, 0.75};
  double closeness_eps = 0.1;
};

// s-grid policy for the flow: h = min(h_max, h_rel sqrt(2s)), dt = dt_factor h^2 unless dt > 0
struct Scenario {
  std::string name = "demo";
  std::string kind = "glued";  // "glued" or "expander" (self-similar runs of sqrt(2s) Sigma)
  LinePair pair;
  double c3 = 0.02;
  std::vector<double> s_grid;
  double h_max = 0.01, h_rel = 0.1;
  double dt = 0.0, dt_factor = 1.0;
  double T = 0.2, snap_every = 0.005;
  std::vector<double> extra_times = {1e-4};
  double expander_tol = 1e-8;
  int probe_seeds = 8;
  VerificationMatrix checks;
  std::uint64_t seed = 1;
  int tolerance_version = 1;

  double h_for(double s) const;
  FlowConfig flow_config(double s) const;
};
Scenario demo_scenario();
// "2^-4..2^-8" (dyadic range) or a comma-separated list
std::vector<double> parse_s_grid(const std::string& text);
json scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const json& j);
// throws PipelineError (or ExpanderError for the line pair) naming the first invalid field
void validate(const Scenario& sc);
// FNV-1a of the canonical JSON, hex
std::string scenario_hash(const Scenario& sc);

// Artifact formats.
json arc_to_json(const ExpanderArc& arc);
// re-solves from the stored pair and configuration; throws if the stored residual is not reproduced
ExpanderArc arc_from_json(const json& j);
json init_to_json(const SingularInitial& init);
SingularInitial init_from_json(const json& j);
json glued_to_json(const GluedCurve& g);
json hypotheses_to_json(const HypothesesReport& r);
json certificate_to_json(const Certificate& c);
json snapshot_to_json(const FlowState& st);
FlowState snapshot_from_json(const json& j);
// run.json plus one snapshot file per stored time
void write_run(const std::filesystem::path& dir, const FlowRun& run);
FlowRun read_run(const std::filesystem::path& dir);

struct StageRecord {
  std::string name;
  bool ran = false, pass = false;
  std::string detail;
  std::vector<std::string> outputs;  // relative to the manifest directory
};
struct RunEntry {
  double s = 0.0;
  std::string dir;
  std::string termination;
  double end_time = 0.0;
};
struct RunManifest {
  std::filesystem::path root;
  std::string scenario_name, scenario_hash, kind;
  json scenario;
  int tolerance_version = 1;
  json tolerances;
  std::vector<StageRecord> stages;
  std::vector<RunEntry> runs;
  bool pass = false;
  std::string halted_at;
  json verifications = json::array();

  const StageRecord* stage(const std::string& name) const;
};
json manifest_to_json(const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const RunManifest& m);

// expander -> glue -> hypotheses -> flow -> density -> monotone -> graphical; a failed gate halts the rest
RunManifest run_pipeline(const Scenario& sc, const std::filesystem::path& out_dir, std::ostream* log = nullptr);
// reruns the checks on the stored artifacts, compares with the stored reports and appends the outcome
json verify_manifest(const std::filesystem::path& manifest_file, std::ostream* log = nullptr);

struct CauchyRow {
  double s_a = 0.0, s_b = 0.0, distance = 0.0;
};
struct AttainmentRow {
  double t = 0.0, distance = 0.0;
};
struct LimitStudy {
  double t_star = 0.0;
  std::vector<CauchyRow> cauchy;  // consecutive s, decreasing s
  bool decreasing = false;
  double s_small = 0.0, delta = 0.2;
  std::vector<AttainmentRow> attainment;
  double t_probe = 1e-4, distance_at_probe = 0.0;
  bool attained = false;
  bool pass = false;
};
struct LimitOptions {
  double t_star = -1.0;   // < 0: the scenario's T
  double delta = 0.2;
  double t_probe = 1e-4;
  double t_max = 0.01;    // attainment rows for t <= t_max
  double tolerance = 5e-3;
};
LimitStudy limit_study(const RunManifest& m, const LimitOptions& opt = {});
json limit_to_json(const LimitStudy& l);
// sup over points of a outside B_delta(0) of the distance to b, and the same with the roles swapped
double hausdorff_outside(const std::vector<PolyCurve>& a, const std::vector<PolyCurve>& b, double delta);

// rows as CSV with a header line
std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

}  // namespace lmcf
