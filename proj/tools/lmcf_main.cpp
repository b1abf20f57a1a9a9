#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lmcf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lmcf;

namespace {

Vec2 parse_point(const std::string& text) {
  auto comma = text.find(',');
  if (comma == std::string::npos) throw std::runtime_error("expected x,y but got '" + text + "'");
  return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") std::cout << j.dump(1) << "\n";
  else write_json_file(out, j);
}

int gate(bool pass) { return pass ? 0 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian mean curvature flow from a transverse double point"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  int code = 0;

  // expander
  auto* ex = app.add_subcommand("expander", "solve for the self-expander of a line pair");
  double phi1 = 0.0, phi2 = 1.5707963267948966, tol = 1e-8, alpha_min = 0.1;
  int pairing = 0;
  std::string ex_out;
  ex->add_option("--phi1", phi1, "angle of the first line");
  ex->add_option("--phi2", phi2, "angle of the second line");
  ex->add_option("--pairing", pairing, "0 joins phi1 and phi2, 1 joins phi2 and phi1 + pi");
  ex->add_option("--tol", tol, "residual tolerance");
  ex->add_option("--alpha-min", alpha_min, "smallest accepted angle between the lines");
  ex->add_option("--out", ex_out, "arc JSON");
  auto* atlas = ex->add_subcommand("atlas", "expanders over a list of opening angles");
  std::string alphas, atlas_out;
  atlas->add_option("--alphas", alphas, "comma-separated angles between the lines")->required();
  atlas->add_option("--out", atlas_out, "atlas JSON");

  // init
  auto* in = app.add_subcommand("init", "write the figure-eight initial curve recipe");
  double c3 = 0.02, init_h = 0.0;
  std::string init_out, init_curve;
  in->add_option("--phi1", phi1);
  in->add_option("--phi2", phi2);
  in->add_option("--pairing", pairing);
  in->add_option("--c3", c3, "cubic coefficient near the node");
  in->add_option("--out", init_out, "init JSON")->required();
  in->add_option("--curve", init_curve, "also write the singular curve");
  in->add_option("--h", init_h, "spacing of the written curve");

  // glue
  auto* gl = app.add_subcommand("glue", "glue the dilated expander into the singular curve");
  std::string init_file, arc_file, glue_out, s_geom;
  double s = 0.01, glue_h = 0.0;
  gl->add_option("--init", init_file, "init JSON");
  gl->add_option("--arc", arc_file, "arc JSON");
  gl->add_option("--s", s, "scale");
  gl->add_option("--h", glue_h, "vertex spacing (default min(0.01, 0.1 sqrt(2s)))");
  gl->add_option("--out", glue_out, "glued curve JSON");
  auto* sweep = gl->add_subcommand("sweep", "glue over a geometric s-grid and check the hypotheses");
  std::string sweep_out;
  sweep->add_option("--init", init_file, "init JSON");
  sweep->add_option("--arc", arc_file, "arc JSON");
  sweep->add_option("--s-geom", s_geom, "e.g. 2^-4..2^-10")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();

  // flow
  auto* fl = app.add_subcommand("flow", "evolve a curve by curve shortening flow");
  std::string flow_in, flow_out;
  double T = 0.2, h = 0.01, dt = 0.0, snap = 0.005, flow_s = -1.0;
  std::string extra;
  fl->add_option("--in", flow_in, "curve JSON")->required();
  fl->add_option("--T", T, "final time");
  fl->add_option("--h", h, "vertex spacing");
  fl->add_option("--dt", dt, "time step (default h^2)");
  fl->add_option("--snap-every", snap, "snapshot cadence");
  fl->add_option("--extra-times", extra, "additional snapshot times, comma-separated");
  fl->add_option("--s", flow_s, "gluing scale (default: read from the curve file)");
  fl->add_option("--out", flow_out, "run directory")->required();

  // density
  auto* de = app.add_subcommand("density", "Gaussian density ratios");
  de->require_subcommand(1);
  auto* dsw = de->add_subcommand("sweep", "uniform density certificate over a family of runs");
  std::vector<std::string> run_dirs;
  double eps0 = 0.05, x0_spacing = 0.1, x0_radius = 1.0;
  int max_times = 12;
  std::string cert_out, csv_out;
  dsw->add_option("--runs", run_dirs, "run directories")->required()->expected(1, -1);
  dsw->add_option("--eps0", eps0);
  dsw->add_option("--x0-spacing", x0_spacing);
  dsw->add_option("--x0-radius", x0_radius);
  dsw->add_option("--max-times", max_times);
  dsw->add_option("--out", cert_out, "certificate JSON");
  dsw->add_option("--csv", csv_out, "delta0 per tau as CSV");
  auto* dch = de->add_subcommand("check", "density ratios and monotonicity at one point");
  std::string run_dir, x0_text = "0,0", r_text;
  double t0 = 0.1;
  std::string check_out;
  dch->add_option("--run", run_dir)->required();
  dch->add_option("--x0", x0_text);
  dch->add_option("--t0", t0);
  dch->add_option("--r", r_text, "radii, comma-separated (default sqrt(t0) {1/2, 5/8, 3/4, 7/8, 1})");
  dch->add_option("--out", check_out);

  // verify
  auto* ve = app.add_subcommand("verify", "re-verify a manifest, or run a single check");
  std::string manifest_file;
  ve->add_option("manifest", manifest_file, "manifest.json of a pipeline run");
  auto* val = ve->add_subcommand("alpha", "monotonicity of the localized alpha integral");
  double T0 = 1.0;
  std::string verify_out;
  val->add_option("--run", run_dir)->required();
  val->add_option("--T0", T0, "time of the backward heat kernel");
  val->add_option("--out", verify_out);
  auto* vst = ve->add_subcommand("stability", "hypotheses of the expander stability statement");
  std::vector<std::string> curve_files;
  double st_eps = 0.05, st_scale = 1.0;
  vst->add_option("--curve", curve_files, "curve JSON (repeat for several components)")->required();
  vst->add_option("--expander", arc_file, "arc JSON")->required();
  vst->add_option("--eps", st_eps);
  vst->add_option("--scale", st_scale, "divide the curves by this factor first, e.g. sqrt(2(s + t))");
  vst->add_option("--out", verify_out);

  // graphical
  auto* gr = app.add_subcommand("graphical", "graphical patch estimates");
  gr->require_subcommand(1);
  auto* gch = gr->add_subcommand("check", "interior curvature estimate and eta inequality on one patch");
  std::string center_text = "0,0";
  double R = 0.5, theta = 0.5, c_const = -1.0, p = 2.0, g_eps = 0.2, g_T = -1.0;
  std::string g_out;
  gch->add_option("--run", run_dir)->required();
  gch->add_option("--center", center_text);
  gch->add_option("--R", R);
  gch->add_option("--theta", theta, "fraction of R");
  gch->add_option("--c", c_const, "constant (default: calibrated on shrinking circles)");
  gch->add_option("--p", p);
  gch->add_option("--eps", g_eps, "determinant condition");
  gch->add_option("--T", g_T, "window (default: whole run)");
  gch->add_option("--out", g_out);

  // pipeline
  auto* rn = app.add_subcommand("run", "run a scenario end to end");
  std::string scenario_file, run_out;
  rn->add_option("scenario", scenario_file, "scenario JSON (omit for the demo scenario)");
  rn->add_option("--out", run_out, "output directory (default: the scenario name)");
  auto* li = app.add_subcommand("limit", "s -> 0 convergence table");
  double t_star = -1.0, delta = 0.2, t_probe = 1e-4;
  std::string limit_out;
  li->add_option("manifest", manifest_file)->required();
  li->add_option("--t-star", t_star);
  li->add_option("--delta", delta);
  li->add_option("--t-probe", t_probe);
  li->add_option("--out", limit_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ex) {
      LinePair pair{phi1, phi2, pairing, alpha_min};
      ExpanderConfig cfg;
      cfg.tol = tol;
      if (*atlas) {
        json rows = json::array();
        bool ok = true;
        for (double a : parse_list(alphas)) {
          LinePair pa{0.0, a, pairing, alpha_min};
          auto arc = expander_solve(pa, cfg);
          ok = ok && arc.residual_sup <= tol;
          rows.push_back({{"alpha", a},
                          {"opening", arc.omega},
                          {"d", arc.shot.d},
                          {"residual_sup", arc.residual_sup},
                          {"decay_b", arc.decay.b},
                          {"decay_quality", arc.decay.quality},
                          {"r0", arc.r0}});
        }
        emit({{"tolerance", tol}, {"atlas", rows}, {"pass", ok}}, atlas_out);
        code = gate(ok);
      } else {
        auto arc = expander_solve(pair, cfg);
        emit(arc_to_json(arc), ex_out);
        std::cerr << "residual " << arc.residual_sup << " decay b " << arc.decay.b << "\n";
        code = gate(arc.residual_sup <= tol);
      }
    } else if (*in) {
      LinePair pair{phi1, phi2, pairing, alpha_min};
      auto init = make_figure_eight(pair, c3);
      write_json_file(init_out, init_to_json(init));
      if (!init_curve.empty()) write_curve(init_curve, init.curve(init_h > 0 ? init_h : 0.01));
    } else if (*gl) {
      if (init_file.empty() || arc_file.empty()) throw std::runtime_error("glue needs --init and --arc");
      auto init = init_from_json(read_json_file(init_file));
      auto arc = arc_from_json(read_json_file(arc_file));
      if (*sweep) {
        std::vector<GluedCurve> fam;
        for (double sv : parse_s_grid(s_geom)) {
          GluingConfig gc;
          gc.s = sv;
          gc.h = std::min(0.01, 0.1 * std::sqrt(2.0 * sv));
          fam.push_back(glue(init, arc, gc));
          std::ostringstream name;
          name << "L_s" << sv << ".json";
          write_json_file(fs::path(sweep_out) / name.str(), glued_to_json(fam.back()));
        }
        auto rep = check_hypotheses(init, arc, fam);
        json j = hypotheses_to_json(rep);
        j["tolerance_version"] = 1;
        write_json_file(fs::path(sweep_out) / "hypotheses.json", j);
        std::cerr << "H1 " << rep.h1 << " H2 " << rep.h2 << " H3 " << rep.h3 << " H4 " << rep.h4 << "\n";
        code = gate(rep.all());
      } else {
        GluingConfig gc;
        gc.s = s;
        gc.h = glue_h > 0 ? glue_h : std::min(0.01, 0.1 * std::sqrt(2.0 * s));
        auto g = glue(init, arc, gc);
        emit(glued_to_json(g), glue_out);
        bool ok = check_embedded(g.curve).embedded && std::max(g.seam_jump_inner, g.seam_jump_outer) <= 1e-6;
        code = gate(ok);
      }
    } else if (*fl) {
      json cj = read_json_file(flow_in);
      PolyCurve c = curve_from_json(cj);
      FlowConfig cfg;
      cfg.h = h;
      cfg.dt = dt;
      EvolveOptions o;
      o.T = T;
      o.snap_every = snap;
      o.s = flow_s >= 0 ? flow_s : cj.value("s", 0.0);
      if (!extra.empty()) o.extra_times = parse_list(extra);
      auto run = evolve(c, cfg, o);
      write_run(flow_out, run);
      std::cerr << to_string(run.reason) << " at t = " << run.end_time() << " after " << run.steps << " steps\n";
      code = gate(run.reason == Termination::TimeReached);
    } else if (*de) {
      if (*dsw) {
        std::vector<FlowRun> runs;
        for (const auto& d : run_dirs) runs.push_back(read_run(d));
        std::vector<const FlowRun*> ptr;
        for (const auto& r : runs) ptr.push_back(&r);
        SweepGrid g;
        g.eps0 = eps0;
        g.x0_spacing = x0_spacing;
        g.x0_radius = x0_radius;
        g.max_times = max_times;
        auto cert = density_sweep(ptr, g);
        emit(certificate_to_json(cert), cert_out);
        if (!csv_out.empty()) {
          std::vector<std::vector<double>> rows;
          for (std::size_t k = 0; k < g.tau.size() && k < cert.delta_per_tau.size(); ++k)
            rows.push_back({g.tau[k], cert.delta_per_tau[k]});
          write_text_file(csv_out, to_csv({"tau", "delta0"}, rows));
        }
        code = gate(!cert.empty);
      } else {
        auto run = read_run(run_dir);
        Vec2 x0 = parse_point(x0_text);
        std::vector<double> r = r_text.empty() ? std::vector<double>{} : parse_list(r_text);
        if (r.empty())
          for (double f : {0.5, 0.625, 0.75, 0.875, 1.0}) r.push_back(f * std::sqrt(t0));
        auto hr = huisken_check(run, x0, t0, r);
        emit({{"x0", {x0.x, x0.y}},
              {"t0", t0},
              {"r", hr.r},
              {"theta", hr.theta},
              {"monotone", hr.monotone},
              {"max_violation", hr.max_violation},
              {"slack", hr.slack},
              {"max_residual", hr.max_residual},
              {"tolerance_version", 1}},
             check_out);
        code = gate(hr.monotone);
      }
    } else if (*ve) {
      if (*val) {
        auto run = read_run(run_dir);
        auto a = alpha_monotonicity_check(run, 0.0, run.end_time(), T0);
        json rows = json::array();
        for (const auto& r : a.rows)
          rows.push_back({{"t", r.t}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"excess", r.excess}});
        emit({{"C", a.C},
              {"T0", a.T0},
              {"slack", a.slack},
              {"max_excess", a.max_excess},
              {"holds", a.holds},
              {"rows", rows},
              {"tolerance_version", 1}},
             verify_out);
        code = gate(a.holds);
      } else if (*vst) {
        std::vector<PolyCurve> parts;
        for (const auto& f : curve_files) {
          parts.push_back(read_curve(f));
          for (auto& v : parts.back().vertices) v = v / st_scale;
          parts.back().h /= st_scale;
        }
        auto arc = arc_from_json(read_json_file(arc_file));
        StabilityParams sp;
        sp.eps = st_eps;
        auto r = stability_hypotheses_check(parts, arc, sp);
        emit({{"i", r.i},
              {"ii", r.ii},
              {"iii", r.iii},
              {"iv", r.iv},
              {"max_curvature", r.max_curvature},
              {"max_density", r.max_density},
              {"deviation", r.deviation},
              {"max_proximity_excess", r.max_proximity_excess},
              {"components", r.components},
              {"closeness", {{"pass", r.closeness.pass}, {"worst", r.closeness.worst}, {"note", r.closeness.note}}},
              {"note", r.note},
              {"pass", r.all()},
              {"tolerance_version", 1}},
             verify_out);
        code = gate(r.all());
      } else {
        if (manifest_file.empty()) throw std::runtime_error("verify needs a manifest or a subcommand");
        auto v = verify_manifest(manifest_file, &std::cerr);
        std::cout << v.dump(1) << "\n";
        code = gate(v.at("pass").get<bool>());
      }
    } else if (*gr) {
      auto run = read_run(run_dir);
      Vec2 y0 = parse_point(center_text);
      double c = c_const > 0 ? c_const : calibrate_interior_constant(circle_calibration_family());
      auto r = interior_estimate_check(run, y0, R, theta, c, p, g_T, g_eps);
      json j = {{"center", {y0.x, y0.y}},
                {"R", R},
                {"theta_frac", theta},
                {"c", c},
                {"lhs", r.lhs},
                {"bound_c", r.bound_c},
                {"bound_initial", r.bound_initial},
                {"rhs", r.rhs},
                {"required_c", r.required_c},
                {"max_det", r.max_det},
                {"hypothesis_ok", r.hypothesis_ok},
                {"pass", r.pass},
                {"tolerance_version", 1}};
      bool ok = r.pass || !r.hypothesis_ok;
      try {
        auto e = eta_evolution_check(run, y0, R, p, g_eps, -1.0, g_T);
        j["eta"] = {{"holds", e.holds}, {"min_residual", e.min_residual}, {"slack", e.slack}, {"samples", e.samples}};
        ok = ok && e.holds;
      } catch (const GraphicalError& e) {
        j["eta"] = {{"conforming", false}, {"reason", e.what()}};
      }
      emit(j, g_out);
      code = gate(ok);
    } else if (*rn) {
      Scenario sc = scenario_file.empty() ? demo_scenario() : scenario_from_json(read_json_file(scenario_file));
      fs::path out = run_out.empty() ? fs::path(sc.name) : fs::path(run_out);
      auto m = run_pipeline(sc, out, &std::cerr);
      std::cerr << (m.pass ? "all gates pass" : "halted at " + m.halted_at) << "; manifest "
                << (out / "manifest.json").string() << "\n";
      code = gate(m.pass);
    } else if (*li) {
      auto m = read_manifest(manifest_file);
      LimitOptions o;
      o.t_star = t_star;
      o.delta = delta;
      o.t_probe = t_probe;
      auto l = limit_study(m, o);
      json j = limit_to_json(l);
      j["tolerance_version"] = m.tolerance_version;
      emit(j, limit_out);
      code = gate(l.pass);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return code;
}
