#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lmcf/numerics.hpp"
#include "lmcf/pipeline.hpp"

using namespace lmcf;
namespace fs = std::filesystem;

namespace {
const double pi = std::numbers::pi;
int failures = 0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// order from successive differences, which removes the error floor common to all levels
double difference_order(const std::vector<double>& e) {
  return std::log2(std::abs(e[0] - e[1]) / std::abs(e[1] - e[2]));
}

double value_near(const std::vector<double>& t, const std::vector<double>& v, double at) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i] - at) < std::abs(t[best] - at)) best = i;
  return v[best];
}

PolyCurve circle(double R, double h) {
  int n = static_cast<int>(std::lround(2 * pi * R / h));
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) v.push_back(unit(2 * pi * i / n) * R);
  return make_closed(v, h);
}

PolyCurve wobbly_loop(double h) {
  std::vector<Vec2> v;
  for (int i = 0; i < 2000; ++i) {
    double a = 2 * pi * i / 2000;
    double r = 1 + 0.2 * std::cos(3 * a) + 0.1 * std::sin(2 * a);
    v.push_back(unit(a) * r);
  }
  return resample(make_closed(v, 0.001), h);
}

// the open arc continued along its rays out to radius R
PolyCurve extend_along_rays(const PolyCurve& c, double R) {
  std::vector<Vec2> v;
  Vec2 e0 = unit(c.rays[0].angle), e1 = unit(c.rays[1].angle);
  int n0 = static_cast<int>(std::ceil((R - norm(c.vertices.front())) / c.h));
  int n1 = static_cast<int>(std::ceil((R - norm(c.vertices.back())) / c.h));
  for (int k = n0; k >= 1; --k) v.push_back(c.vertices.front() + e0 * (k * c.h));
  v.insert(v.end(), c.vertices.begin(), c.vertices.end());
  for (int k = 1; k <= n1; ++k) v.push_back(c.vertices.back() + e1 * (k * c.h));
  return make_open(v, c.h, c.rays[0], c.rays[1]);
}

FlowRun flow(const PolyCurve& c, double h, double dt, double T, double snap, double s = 0, bool every = false) {
  FlowConfig cfg;
  cfg.h = h;
  cfg.dt = dt;
  EvolveOptions o;
  o.T = T;
  o.snap_every = snap;
  o.s = s;
  o.discrepancy_every_step = every;
  return evolve(c, cfg, o);
}

double mean_r2(const PolyCurve& c) {
  double sum = 0;
  for (auto v : c.vertices) sum += norm2(v);
  return sum / static_cast<double>(c.size());
}

struct Fixture {
  ExpanderArc arc;
  SingularInitial init;
};
const Fixture& fixture() {
  static Fixture f = [] {
    Fixture x;
    x.arc = expander_solve(LinePair{});
    x.init = make_figure_eight(LinePair{});
    return x;
  }();
  return f;
}

void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  double h = 0.02, T = 0.4 * 1.0 / 2;
  auto run = flow(circle(1.0, h), h, 0.0, T, T / 20);
  double worst = 0;
  for (const auto& st : run.snapshots)
    worst = std::max(worst, std::abs(mean_r2(st.curve) - (1 - 2 * st.t)) / (1 - 2 * st.t));
  double secs = seconds_since(t0);
  bool ok = run.reason == Termination::TimeReached && worst <= 1e-3 && secs < 10;
  report(1, "shrinking circle R^2 = R0^2 - 2t", ok,
         "max relative error " + num(worst) + " up to t = " + num(run.end_time()) + " (h 0.02, dt h^2), " + num(secs) +
             " s");
}

void criterion_2() {
  std::vector<std::string> parts;
  bool ok = true;
  auto add = [&](const std::string& what, double order, double need) {
    ok = ok && order >= need;
    parts.push_back(what + " " + num(order));
  };
  {
    std::vector<double> hs, e;
    for (double h : {0.04, 0.02, 0.01}) {
      auto run = flow(circle(1.0, h), h, h * h, 0.2, 0.05, 0, true);
      hs.push_back(h);
      e.push_back(std::max(run.max_discrepancy_theta, run.max_discrepancy_beta));
    }
    add("circle (i,ii) h-order", observed_order(hs, e), 1.8);
    std::vector<double> d;
    for (double f : {4.0, 2.0, 1.0}) {
      auto run = flow(circle(1.0, 0.02), 0.02, f * 4e-4, 0.2, 0.05, 0, true);
      d.push_back(std::max(run.max_discrepancy_theta, run.max_discrepancy_beta));
    }
    add("dt-order", difference_order(d), 0.9);
  }
  {
    const auto& F = fixture();
    double s = 1.0 / 16;
    std::vector<double> hs, th, be;
    for (double h : {0.04, 0.02, 0.01}) {
      GluingConfig gc;
      gc.s = s;
      gc.h = h;
      auto run = flow(glue(F.init, F.arc, gc).curve, h, h * h, 0.02, 0.005, s, true);
      hs.push_back(h);
      th.push_back(run.max_discrepancy_theta);
      be.push_back(run.max_discrepancy_beta);
    }
    add("glued (i) h-order", observed_order(hs, th), 1.8);
    add("(ii) h-order", observed_order(hs, be), 1.8);
    std::vector<double> dth, dbe;
    for (double f : {4.0, 2.0, 1.0}) {
      GluingConfig gc;
      gc.s = s;
      gc.h = 0.01;
      auto run = flow(glue(F.init, F.arc, gc).curve, 0.01, f * 1e-4, 0.02, 0.005, s, true);
      dth.push_back(run.max_discrepancy_theta);
      dbe.push_back(run.max_discrepancy_beta);
    }
    add("(i) dt-order", difference_order(dth), 0.9);
    add("(ii) dt-order", difference_order(dbe), 0.9);
  }
  {
    std::vector<double> hs, e;
    for (double h : {0.04, 0.02, 0.01}) {
      auto run = flow(wobbly_loop(h), h, h * h, 0.02, 2 * h * h);
      auto re = rho_evolution_check(run, {0.8, 0.3}, 0.1);
      hs.push_back(h);
      e.push_back(value_near(re.t, re.residual, 0.01));
    }
    add("(iii) h-order", observed_order(hs, e), 1.8);
    std::vector<double> d;
    for (double f : {1.0, 0.5, 0.25}) {
      auto run = flow(wobbly_loop(0.02), 0.02, f * 4e-4, 0.04, 8e-4);
      d.push_back(rho_evolution_check(run, {0.8, 0.3}, 0.1).max_residual);
    }
    add("(iii) dt-order", difference_order(d), 0.9);
  }
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : ", ") + p;
  report(2, "evolution identities converge", ok, detail);
}

void criterion_3(const std::vector<fs::path>& manifests) {
  bool ok = true;
  int checked = 0;
  double worst = -INFINITY;
  std::string why;
  for (const auto& mf : manifests) {
    auto m = read_manifest(mf);
    const auto* st = m.stage("monotone");
    if (!st || !st->ran) {
      ok = false;
      why += "; monotone stage of " + m.scenario_name + " did not run";
      continue;
    }
    auto rep = read_json_file(m.root / "monotone/report.json");
    for (const auto& run : rep.at("runs"))
      for (const auto& hq : run.value("huisken", json::array())) {
        if (hq.contains("error")) {
          ok = false;
          why += "; " + hq.at("error").get<std::string>();
          continue;
        }
        ++checked;
        ok = ok && hq.at("monotone").get<bool>();
        worst = std::max(worst, hq.at("max_violation").get<double>() - hq.at("slack").get<double>());
      }
  }
  std::vector<double> hs, e;
  for (double h : {0.04, 0.02, 0.01}) {
    auto run = flow(circle(1.0, h), h, h * h / 4, 0.45, 0.005);
    auto hr = huisken_check(run, {0, 0}, 0.5, {0.3, 0.4, 0.5, 0.6, 0.7});
    ok = ok && hr.monotone;
    hs.push_back(h);
    e.push_back(hr.max_residual);
  }
  double ho = observed_order(hs, e);
  std::vector<double> d;
  for (double f : {1.0, 0.5, 0.25}) {
    auto run = flow(wobbly_loop(0.02), 0.02, f * 4e-4, 0.04, 8e-4);
    auto hr = huisken_check(run, {0.8, 0.3}, 0.1, {0.25, 0.28, 0.3});
    ok = ok && hr.monotone;
    d.push_back(hr.max_residual);
  }
  double dto = difference_order(d);
  ok = ok && checked > 0 && ho >= 1.8 && dto >= 0.9;
  report(3, "Gaussian density monotone in r", ok,
         std::to_string(checked) + " scenario queries monotone (worst violation - slack " + num(worst) +
             "); residual h-order " + num(ho) + ", dt-order " + num(dto) + why);
}

void criterion_4() {
  const auto& F = fixture();
  const auto& arc = F.arc;
  double t_start = 0.05, h = 0.01;
  auto start = extend_along_rays(expander_flow(arc.curve(h / std::sqrt(2 * t_start)), t_start), 8.0);
  FlowConfig cfg;
  cfg.h = h;
  cfg.check_embedded = false;
  EvolveOptions o;
  o.T = 0.5 - t_start;
  o.snap_every = o.T;
  o.s = t_start;
  auto run = evolve(start, cfg, o);
  double dil = hausdorff(run.snapshots.back().curve, arc.curve(0.002)).value;
  ExpanderConfig ec;
  auto probe = multi_start_probe(arc.pair, ec, 32, 1);
  double slope = -arc.decay.b;
  bool ok = arc.residual_sup <= 1e-8 && run.reason == Termination::TimeReached && dil <= 1e-4 && slope < 0 &&
            arc.decay.quality >= 0.99 && probe.converged == 32 && probe.max_hausdorff <= 1e-6;
  report(4, "self-expander", ok,
         "residual " + num(arc.residual_sup) + "; flow from t = 0.05 vs sqrt(2t) Sigma at t = 0.5: " + num(dil) +
             "; decay slope " + num(slope) + " quality " + num(arc.decay.quality) + "; multi-start " +
             std::to_string(probe.converged) + "/32 spread " + num(probe.max_hausdorff));
}

void criterion_5(const RunManifest& demo) {
  const auto& F = fixture();
  bool ok = true;
  long samples = 0, mismatches = 0;
  double worst_jump = 0;
  int curves = 0;
  for (const auto& e : demo.runs) {
    double s = e.s, q = std::sqrt(2 * s), c = std::pow(s, 0.25);
    GluingConfig gc;
    gc.s = s;
    gc.h = 0.01;
    auto g = glue(F.init, F.arc, gc);
    for (int k = 0; k < 4; ++k) {
      double inner = q * g.rho_seam[k % 2];
      for (int i = 1; i < 200; ++i) {
        double rho = inner + (c - inner) * i / 200.0;
        auto P = glued_potential(F.init, F.arc, s, k, rho);
        ++samples;
        if (P.branch != Branch::Expander || P.dw != expander_offset_scaled(F.arc, s, k, rho)) ++mismatches;
      }
      for (int i = 1; i < 200; ++i) {
        double rho = 2 * c + (4.0 - 2 * c) * i / 200.0;
        auto P = glued_potential(F.init, F.arc, s, k, rho);
        double u[4];
        F.init.u(k, rho, u);
        ++samples;
        if (P.branch != Branch::Initial || P.w != u[0] || P.dw != u[1] || P.d2w != u[2] || P.d3w != u[3]) ++mismatches;
      }
    }
  }
  const auto* st = demo.stage("glue");
  if (!st || !st->ran) {
    ok = false;
  } else {
    auto rep = read_json_file(demo.root / "glue/report.json");
    for (const auto& row : rep.at("curves")) {
      ++curves;
      ok = ok && row.at("embedded").get<bool>();
      worst_jump = std::max(
          {worst_jump, row.at("seam_jump_inner").get<double>(), row.at("seam_jump_outer").get<double>()});
    }
  }
  ok = ok && mismatches == 0 && worst_jump <= 1e-6 && curves == static_cast<int>(demo.runs.size());
  report(5, "gluing regions and seams", ok,
         std::to_string(samples - mismatches) + "/" + std::to_string(samples) +
             " potential samples bit-identical to the expander (inner) or the initial curve (outer); worst seam jump " +
             num(worst_jump) + " rad; " + std::to_string(curves) + " curves embedded");
}

void criterion_6(const RunManifest& deep) {
  const auto* st = deep.stage("hypotheses");
  if (!st || !st->ran) {
    report(6, "hypotheses H1-H4", false, "hypotheses stage did not run");
    return;
  }
  auto r = read_json_file(deep.root / "hypotheses/report.json");
  auto ratio = [&](const char* key) {
    std::vector<double> v = r.at(key).get<std::vector<double>>();
    return uniformity_ratio(v);
  };
  auto cl = r.at("closeness_per_s").get<std::vector<double>>();
  auto sv = r.at("s_values").get<std::vector<double>>();
  bool dec = true;
  for (std::size_t i = 1; i < cl.size(); ++i) dec = dec && (sv[i] < sv[i - 1]) == (cl[i] < cl[i - 1]);
  bool all = r.at("pass").get<bool>();
  double r1 = ratio("D1_per_s"), r2 = ratio("D2_per_s"), r3 = ratio("D3_per_s");
  bool ok = all && dec && r1 <= 2 && r2 <= 2 && r3 <= 2 && sv.size() == 7;
  report(6, "hypotheses H1-H4 on 2^-4..2^-10", ok,
         std::string(all ? "H1-H4 hold" : "H1-H4 fail") + "; D1/D2/D3 spread " + num(r1) + "/" + num(r2) + "/" +
             num(r3) + "; closeness " + num(cl.front()) + " -> " + num(cl.back()) +
             (dec ? " strictly decreasing with s" : " not strictly decreasing with s"));
}

void criterion_7(const RunManifest& demo, double secs) {
  const auto* st = demo.stage("density");
  if (!st || !st->ran) {
    report(7, "uniform density certificate", false, "density stage did not run");
    return;
  }
  auto r = read_json_file(demo.root / "density/report.json");
  const auto& c = r.at("certificate");
  bool nonempty = !c.at("empty").get<bool>();
  double ratio = r.contains("white") ? r.at("white").at("ratio").get<double>() : INFINITY;
  bool ok = nonempty && ratio <= 2 && std::isfinite(ratio) && secs < 300;
  report(7, "uniform density certificate", ok,
         nonempty ? "s0 " + num(c.at("s0").get<double>()) + " delta0 " + num(c.at("delta0").get<double>()) + " tau " +
                        num(c.at("tau").get<double>()) + " max theta " + num(c.at("max_theta").get<double>()) +
                        "; white C_emp spread " + num(ratio) + "; demo pipeline " + num(secs) + " s"
                  : "empty certificate; demo pipeline " + num(secs) + " s");
}

void criterion_8(const std::vector<fs::path>& manifests) {
  bool ok = true;
  int runs = 0, rows = 0;
  double worst = -INFINITY;
  for (const auto& mf : manifests) {
    auto m = read_manifest(mf);
    const auto* st = m.stage("monotone");
    if (!st || !st->ran) {
      ok = false;
      continue;
    }
    auto rep = read_json_file(m.root / "monotone/report.json");
    for (const auto& run : rep.at("runs")) {
      const auto& a = run.at("alpha");
      if (a.contains("error")) {
        ok = false;
        continue;
      }
      ++runs;
      rows += a.at("rows").get<int>();
      ok = ok && a.at("holds").get<bool>();
      worst = std::max(worst, a.at("max_excess").get<double>() - a.at("slack").get<double>());
    }
  }
  ok = ok && runs > 0;
  report(8, "localized alpha integral inequality", ok,
         std::to_string(runs) + " glued runs, " + std::to_string(rows) +
             " sampled times; worst excess - 20(h^2 + dt) = " + num(worst));
}

void criterion_9(const RunManifest& demo) {
  std::vector<FlowRun> runs;
  for (const auto& e : demo.runs) runs.push_back(read_run(demo.root / e.dir));
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> ux(-1.0, 1.0), ur(0.05, 0.6);
  double worst = 0;
  int n = 0;
  for (; n < 1000; ++n) {
    const auto& run = runs[rng() % runs.size()];
    const auto& st = run.snapshots[rng() % run.snapshots.size()];
    Vec2 x0{ux(rng), ux(rng)};
    double r = ur(rng);
    worst = std::max(worst, rescaled_identity_check(st, run.s, x0, r).relative);
  }
  report(9, "rescaling identity", worst <= 1e-12,
         std::to_string(n) + " random queries on the demo runs, max relative difference " + num(worst));
}

void criterion_10(const RunManifest& demo) {
  const auto* st = demo.stage("graphical");
  if (!st || !st->ran) {
    report(10, "graphical estimates", false, "graphical stage did not run");
    return;
  }
  auto r = read_json_file(demo.root / "graphical/report.json");
  double c = r.at("calibration").at("c").get<double>();
  int eta_ok = 0, eta_total = 0, int_ok = 0, int_total = 0;
  double eta_worst = INFINITY, c_needed = 0;
  for (const auto& run : r.at("runs"))
    for (const auto& p : run.value("patches", json::array())) {
      if (p.contains("eta") && p.at("eta").contains("holds")) {
        ++eta_total;
        if (p.at("eta").at("holds").get<bool>()) ++eta_ok;
        eta_worst = std::min(eta_worst, p.at("eta").at("min_residual").get<double>() + p.at("eta").at("slack").get<double>());
      }
      for (const auto& row : p.value("interior", json::array())) {
        if (!row.value("hypothesis_ok", false)) continue;
        ++int_total;
        if (row.at("pass").get<bool>()) ++int_ok;
        c_needed = std::max(c_needed, row.at("required_c").get<double>());
      }
    }
  auto family = circle_calibration_family();
  int cal_ok = 0;
  for (auto rep : family) {
    rep.c = c;
    double bound_c = c / (rep.R * rep.R * (1 - rep.theta_frac) * (1 - rep.theta_frac)) * rep.sup_eta_m4p;
    if (rep.lhs <= std::min(bound_c, rep.bound_initial) * (1 + 1e-9)) ++cal_ok;
  }
  const auto& q1 = r.at("q1");
  bool q1_ok = q1.at("pass").get<bool>();
  double q1_ratio = q1.at("ratio").is_number() ? q1.at("ratio").get<double>() : INFINITY;
  bool ok = eta_total > 0 && eta_ok == eta_total && int_total > 0 && int_ok == int_total &&
            cal_ok == static_cast<int>(family.size()) && q1_ok;
  report(10, "graphical patch estimates", ok,
         "eta inequality " + std::to_string(eta_ok) + "/" + std::to_string(eta_total) +
             " conforming patches (worst residual + slack " + num(eta_worst) + "); interior estimate with c " + num(c) +
             ": circles " + std::to_string(cal_ok) + "/" + std::to_string(family.size()) + ", glued " +
             std::to_string(int_ok) + "/" + std::to_string(int_total) + " (largest c needed " + num(c_needed) +
             "); q1 spread " + num(q1_ratio) + (q1_ok ? " uniform" : " not uniform"));
}

void criterion_11(const fs::path& deep_manifest) {
  try {
    auto l = limit_study(read_manifest(deep_manifest));
    std::string cauchy;
    for (const auto& row : l.cauchy) cauchy += (cauchy.empty() ? "" : ", ") + num(row.distance);
    report(11, "s -> 0 limit", l.pass,
           "consecutive distances at t* = " + num(l.t_star) + ": " + cauchy +
               (l.decreasing ? " (decreasing)" : " (not decreasing)") + "; outside B_0.2 at t = 1e-4, s = " +
               num(l.s_small) + ": " + num(l.distance_at_probe));
  } catch (const std::exception& e) {
    report(11, "s -> 0 limit", false, e.what());
  }
}
}  // namespace

int main(int argc, char** argv) {
  fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::remove_all(work);
  fs::create_directories(work);
  std::printf("tolerance table version %d\n", tolerance_table(1).version);

  criterion_1();
  criterion_2();

  Scenario demo = demo_scenario();
  auto t0 = std::chrono::steady_clock::now();
  auto dm = run_pipeline(demo, work / "demo");
  double demo_secs = seconds_since(t0);
  Scenario deep = demo_scenario();
  deep.name = "deep";
  deep.s_grid = parse_s_grid("2^-4..2^-10");
  auto deep_m = run_pipeline(deep, work / "deep");
  std::vector<fs::path> manifests = {work / "demo/manifest.json", work / "deep/manifest.json"};

  criterion_3(manifests);
  criterion_4();
  criterion_5(dm);
  criterion_6(deep_m);
  criterion_7(dm, demo_secs);
  criterion_8(manifests);
  criterion_9(dm);
  criterion_10(dm);
  criterion_11(work / "deep/manifest.json");

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
